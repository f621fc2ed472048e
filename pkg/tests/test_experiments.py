"""实验驱动测试：单调性扫描、导数交叉检验、极限检验参数校验、对称审计与 Fučik 检验。"""

from __future__ import annotations

import hashlib

import numpy as np
import pytest

from conftest import COARSE, MEDIUM
from core.exceptions import ConfigurationError
from core.schemas import AnnulusSpec, RadialProblem, ScalarField, SolverConfig, SweepRow, SweepTable
from infra.mesh.annulus import generate_annulus_mesh, mirror_index
from infra.radial.shooting import radial_first_eigenvalue
from services.experiment_service import ExperimentService, config_hash


def _table(rows):
    return SweepTable(rows=rows, metadata={})


# ============================================================
# 1. 对称审计
# ============================================================
class TestSymmetryCheck:
    """镜像顶点对的最大差异."""

    @pytest.fixture
    def mesh(self):
        return generate_annulus_mesh(AnnulusSpec(1.0, 0.3, 0.2), *COARSE)

    def _tent(self, mesh):
        x, y = mesh.vertices.T
        u = np.minimum(np.hypot(x - 0.2, y) - 0.3, 1.0 - np.hypot(x, y))
        u[mesh.boundary_mask()] = 0.0
        return u / np.max(u)

    def test_symmetric_field(self, mesh):
        field = ScalarField(self._tent(mesh), mesh)
        assert ExperimentService.symmetry_check(mesh, field) == 0.0

    def test_single_perturbed_vertex(self, mesh):
        """扰动一个非轴上、非最大值的顶点，差异等于扰动量."""
        u = self._tent(mesh)
        na = mesh.n_angular
        k = 2 * na + 3
        assert mirror_index(mesh)[k] != k and u[k] < 0.9
        u[k] += 1e-3
        np.testing.assert_allclose(ExperimentService.symmetry_check(mesh, ScalarField(u, mesh)), 1e-3, rtol=1e-9)

    def test_converged_eigenfield(self, solve):
        result = solve(1.0, 0.3, 0.2, 2.0, COARSE)
        assert ExperimentService.symmetry_check(result.mesh, result) <= 1e-6


# ============================================================
# 2. 单调性扫描
# ============================================================
class TestSweep:
    """λ1(s) 的严格递减判定."""

    def test_single_row(self):
        """单行扫描：判定空真，表格完整."""
        table = ExperimentService.sweep_lambda_vs_s(1.0, 0.3, 2.0, [0.2], COARSE)
        assert len(table.rows) == 1
        assert table.verdict is True
        row = table.rows[0]
        assert row.converged and row.dlambda_inner is not None and row.dlambda_fd is None

    def test_decreasing_p2(self):
        table = ExperimentService.sweep_lambda_vs_s(1.0, 0.3, 2.0, [0.0, 0.2, 0.4], MEDIUM)
        assert table.verdict is True, table.failures
        lams = [r.lam for r in table.rows]
        assert lams[0] > lams[1] > lams[2]
        assert [r.s for r in table.rows] == [0.0, 0.2, 0.4]

    def test_config_hash(self):
        table = ExperimentService.sweep_lambda_vs_s(1.0, 0.3, 2.0, [0.1], (4, 16), config_string="sweep --demo")
        assert table.config_string == "sweep --demo"
        assert table.config_hash == hashlib.sha256(b"sweep --demo").hexdigest() == config_hash("sweep --demo")
        assert table.metadata["config_hash"] == table.config_hash

    def test_rerun_identical(self):
        a = ExperimentService.sweep_lambda_vs_s(1.0, 0.3, 2.0, [0.0, 0.3], (4, 16))
        b = ExperimentService.sweep_lambda_vs_s(1.0, 0.3, 2.0, [0.0, 0.3], (4, 16))
        assert [(r.lam, r.dlambda_inner, r.dlambda_outer) for r in a.rows] == \
               [(r.lam, r.dlambda_inner, r.dlambda_outer) for r in b.rows]
        assert a.config_hash == b.config_hash

    def test_non_converged_poisons_verdict(self):
        table = ExperimentService.sweep_lambda_vs_s(1.0, 0.3, 3.0, [0.0, 0.2], COARSE,
                                                    config=SolverConfig(max_iter=1))
        assert table.verdict is None
        assert len(table.rows) == 2 and not table.all_converged
        assert table.failures

    @pytest.mark.parametrize("s_values", [[0.2, 0.1], [0.0, 0.0], [0.0, 0.66], [-0.1], []])
    def test_invalid_offsets(self, s_values):
        """s 必须严格递增并停在 R1 − R0 − 0.05·R1 之前."""
        with pytest.raises(ConfigurationError):
            ExperimentService.sweep_lambda_vs_s(1.0, 0.3, 2.0, s_values, COARSE)


# ============================================================
# 3. 导数交叉检验 (合成表格)
# ============================================================
class TestDerivativeCheck:
    """三种导数估计的符号、一致性与 s=0 处的比值."""

    def test_consistent_table(self):
        rows = [
            SweepRow(s=0.0, lam=20.0, dlambda_inner=-0.01, dlambda_outer=0.01, dlambda_fd=-0.05, converged=True),
            SweepRow(s=0.3, lam=18.0, dlambda_inner=-10.0, dlambda_outer=-10.5, dlambda_fd=-9.8, converged=True),
        ]
        verdict, failures = ExperimentService.derivative_check(_table(rows))
        assert verdict is True and failures == []

    def test_positive_value_fails(self):
        rows = [SweepRow(s=0.2, lam=19.0, dlambda_inner=-1.0, dlambda_outer=0.5, converged=True)]
        verdict, failures = ExperimentService.derivative_check(_table(rows))
        assert verdict is False and any("outer" in f for f in failures)

    def test_disagreement_fails(self):
        rows = [SweepRow(s=0.2, lam=19.0, dlambda_inner=-1.0, dlambda_outer=-1.5, dlambda_fd=-1.0, converged=True)]
        verdict, _ = ExperimentService.derivative_check(_table(rows))
        assert verdict is False

    def test_nonzero_at_origin_fails(self):
        rows = [
            SweepRow(s=0.0, lam=20.0, dlambda_inner=-1.0, dlambda_outer=-1.0, converged=True),
            SweepRow(s=0.3, lam=18.0, dlambda_inner=-10.0, dlambda_outer=-10.0, converged=True),
        ]
        verdict, _ = ExperimentService.derivative_check(_table(rows))
        assert verdict is False

    def test_non_converged(self):
        rows = [SweepRow(s=0.2, lam=19.0, converged=False)]
        assert ExperimentService.derivative_check(_table(rows)) == (None, ["存在未收敛的行"])


# ============================================================
# 4. 极限检验的参数校验
# ============================================================
class TestLimitValidation:
    """p 范围与顺序在任何求解之前检查."""

    @pytest.mark.parametrize("p_values", [[2.0], [1.5, 10.0], [10.0, 5.0], [100.0]])
    def test_p_infinity_range(self, p_values):
        with pytest.raises(ConfigurationError):
            ExperimentService.limit_p_infinity_check(1.0, 0.3, [0.0], p_values, COARSE)

    @pytest.mark.parametrize("p_values", [[1.0], [2.0], [1.2, 1.4]])
    def test_p_one_range(self, p_values):
        with pytest.raises(ConfigurationError):
            ExperimentService.limit_p_1_check(1.0, 0.5, p_values, COARSE)

    def test_p_infinity_targets(self):
        """粗网格上只检查报告结构与闭式目标值."""
        report = ExperimentService.limit_p_infinity_check(1.0, 0.3, [0.0, 0.4], [4.0], (4, 16))
        assert report.kind == "p_infinity" and len(report.cells) == 2
        np.testing.assert_allclose([c.target for c in report.cells], [2.0 / 0.7, 2.0 / 1.1], rtol=1e-14)
        assert report.checks["targets_decreasing"] is True

    def test_p_one_reports_ratio(self):
        report = ExperimentService.limit_p_1_check(1.0, 0.5, [1.5], (4, 16), s_values=[0.2])
        assert report.checks["h0"] == 4.0
        assert report.checks["perimeter_volume_ratio"] == {0.0: 4.0, 0.2: 4.0}
        assert [c.s for c in report.cells] == [0.0, 0.2]


# ============================================================
# 5. Fučik 节点分裂检验
# ============================================================
@pytest.mark.slow
class TestFucik:
    """外侧节点圆环平移内孔后特征值严格下降."""

    def test_zero_shift_states_equality(self):
        report = ExperimentService.fucik_nodal_split_check(1.0, 2.0, 0.0, COARSE)
        assert report.verdict is None and report.note == "equality"
        assert report.lambda_out_0 == report.lambda_out_s

    def test_shift_too_large(self):
        with pytest.raises(ConfigurationError):
            ExperimentService.fucik_nodal_split_check(1.0, 2.0, 0.4, COARSE)

    def test_strict_decrease(self):
        report = ExperimentService.fucik_nodal_split_check(1.0, 2.0, 0.05, MEDIUM)
        assert report.converged
        assert report.verdict is True, report.failures
        assert report.lambda_out_s < report.lambda_out_0

    def test_annulus_level(self):
        """给定 R0 时 lambda_level 是分裂半径处两侧圆环共同的径向第一特征值."""
        report = ExperimentService.fucik_nodal_split_check(1.0, 2.0, 0.02, COARSE, R0=0.2)
        inner = radial_first_eigenvalue(RadialProblem.annulus(0.2, report.split_radius, 2.0))
        outer = radial_first_eigenvalue(RadialProblem.annulus(report.split_radius, 1.0, 2.0))
        np.testing.assert_allclose(report.lambda_level, inner, rtol=1e-6)
        np.testing.assert_allclose(report.lambda_level, outer, rtol=1e-6)
        np.testing.assert_allclose(report.lambda_out_oracle, outer, rtol=1e-6)
