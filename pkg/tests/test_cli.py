"""命令行测试：参数解析、用法错误、CSV 格式、确定性与运行存档。"""

from __future__ import annotations

import pytest

import app
from infra.storage import sql_db
from infra.utils.export import format_value, render_csv
from services.experiment_service import config_hash


@pytest.fixture(autouse=True)
def _workdir(tmp_path, monkeypatch):
    """日志文件写到临时目录."""
    monkeypatch.chdir(tmp_path)


def _read(path):
    return path.read_text(encoding="utf-8").splitlines()


# ============================================================
# 1. 数值列表与分辨率
# ============================================================
class TestParsing:
    """--s / --p / --res 的语法."""

    def test_inclusive_range(self):
        values = app.parse_values("0:0.6:0.1")
        assert values == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]

    def test_range_end_within_half_step(self):
        assert app.parse_values("0:0.64:0.1")[-1] == 0.6
        assert app.parse_values("0:0.66:0.1")[-1] == 0.7

    def test_list_and_single(self):
        assert app.parse_values("0,0.2,0.4") == [0.0, 0.2, 0.4]
        assert app.parse_values("2") == [2.0]

    @pytest.mark.parametrize("text", ["a", "0:1", "0:1:0", "1:0:0.1"])
    def test_invalid_values(self, text):
        with pytest.raises(app.UsageError):
            app.parse_values(text)

    def test_resolution(self):
        assert app.parse_resolution("32x128") == (32, 128)
        for bad in ("32", "1x8", "4x7", "axb"):
            with pytest.raises(app.UsageError):
                app.parse_resolution(bad)


# ============================================================
# 2. 用法错误 (退出码 2，且不做任何计算)
# ============================================================
class TestUsageErrors:
    """非法参数打印参考并返回 2."""

    @pytest.mark.parametrize("argv", [
        [],
        ["bogus"],
        ["sweep", "--R0", "0.9", "--R1", "0.3", "--p", "2", "--s", "0:0.6:0.1", "--res", "32x128"],
        ["sweep", "--R1", "1", "--R0", "0.3", "--s", "0:0.7:0.1"],
        ["sweep", "--R1", "1", "--R0", "0.3", "--p", "2,3"],
        ["solve", "--R1", "1"],
        ["solve", "--R1", "1", "--R0", "0.3", "--p", "1"],
        ["solve", "--R1", "1", "--R0", "0.3", "--res", "4x9"],
        ["solve", "--R1", "1", "--R0", "0.3", "--jobs", "0"],
        ["solve", "--R1", "1", "--R0", "0.3", "--unknown-flag"],
        ["mesh-info", "--R1", "1", "--R0", "0.3", "--s", "0,0.1"],
    ])
    def test_exit_two(self, argv, capsys):
        assert app.run(argv) == 2
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "eccentra" in captured.err

    def test_help(self, capsys):
        assert app.run(["--help"]) == 0


# ============================================================
# 3. CSV 输出
# ============================================================
class TestCsv:
    """表头、注释行与数值格式."""

    def test_format_value(self):
        assert format_value(None) == ""
        assert format_value(True) == "true" and format_value(False) == "false"
        assert format_value(0.1) == "0.10000000000000001"
        assert format_value(7) == "7"

    def test_render(self):
        text = render_csv(("a", "b"), [[1.0, None]], "demo")
        assert text == "# config: demo\na,b\n1,\n"

    def test_mesh_info(self, tmp_path):
        out = tmp_path / "info.csv"
        dump = tmp_path / "mesh.txt"
        code = app.run(["mesh-info", "--R1", "1", "--R0", "0.3", "--s", "0.1", "--res", "2x8",
                        "-o", str(out), "--emit-mesh", str(dump)])
        assert code == 0
        lines = _read(out)
        assert lines[0].startswith("# config: mesh-info --R1 1.0 --R0 0.3 --s 0.1")
        assert lines[1] == "quantity,value"
        assert "vertices,24" in lines and "triangles,32" in lines and "euler_characteristic,0" in lines
        assert _read(dump)[0] == "24 32 16"

    def test_solve_row(self, tmp_path):
        out = tmp_path / "solve.csv"
        code = app.run(["solve", "--R1", "1", "--R0", "0.5", "--s", "0", "--p", "2", "--res", "4x16", "-o", str(out)])
        assert code == 0
        lines = _read(out)
        assert lines[1] == "s,lambda,dlambda_inner,dlambda_outer,dlambda_fd,iterations,converged"
        assert len(lines) == 3
        cells = lines[2].split(",")
        assert cells[0] == "0" and cells[2:5] == ["", "", ""] and cells[-1] == "true"
        assert float(cells[1]) > 0.0

    def test_stdout_when_no_output(self, capsys):
        assert app.run(["mesh-info", "--R1", "1", "--R0", "0.3", "--res", "2x8"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("# config: mesh-info") and out[1] == "quantity,value"

    @pytest.mark.slow
    def test_fucik_rows(self, tmp_path):
        """fucik-check 读取默认 radial 配置段完成计算，并按能级命名输出行."""
        out = tmp_path / "fucik.csv"
        code = app.run(["fucik-check", "--R1", "1", "--p", "2", "--s-shift", "0.05", "--res", "8x32", "-o", str(out)])
        assert code in (0, 1)
        labels = [line.split(",")[0] for line in _read(out)[2:]]
        assert "lambda_level" in labels and "s_shift" in labels
        assert not any("ball" in label for label in labels)

    def test_non_convergence_exit_three(self, tmp_path):
        out = tmp_path / "nc.csv"
        code = app.run(["solve", "--R1", "1", "--R0", "0.3", "--p", "3", "--res", "4x16",
                        "--max-iter", "1", "-o", str(out)])
        assert code == 3
        assert _read(out)[2].endswith(",false")


# ============================================================
# 4. 可复现性与存档
# ============================================================
class TestReproducibility:
    """相同 argv 产生逐字节一致的 CSV；存档不影响输出."""

    ARGV = ["sweep", "--R1", "1", "--R0", "0.3", "--p", "2", "--s", "0:0.2:0.2", "--res", "4x16"]

    def test_identical_csv(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert app.run(self.ARGV + ["-o", str(a)]) == app.run(self.ARGV + ["-o", str(b), "--jobs", "2"])
        assert a.read_bytes() == b.read_bytes()

    def test_canonical_config_excludes_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        app.run(self.ARGV + ["-o", str(a)])
        app.run(self.ARGV + ["-o", str(b), "--log-level", "DEBUG"])
        assert _read(a)[0] == _read(b)[0]

    def test_archive(self, tmp_path):
        out, db = tmp_path / "a.csv", tmp_path / "runs.db"
        code = app.run(self.ARGV + ["-o", str(out), "--db", str(db)])
        config_string = _read(out)[0][len("# config: "):]
        runs = sql_db.find_runs(str(db), config_hash(config_string))
        assert len(runs) == 1
        assert runs[0]["exit_code"] == code and runs[0]["subcommand"] == "sweep"
        assert runs[0]["rows"] == _read(out)[2:]
