"""
Eccentra 命令行入口
偏心圆环 p-Laplace 第一特征值数值实验室：求解、单调性扫描、形状导数、极限检验与 Fučik 检验。
CSV 写到 --output 指定的文件或标准输出，日志写到标准错误与滚动日志文件。
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import List, Optional

from config import loader as config_manager
from core import logger as logger_config
from core.exceptions import EccentraError, ConfigurationError, NonConvergedError, OracleError
from core.schemas import AnnulusSpec, RunConfig
from infra.mesh.annulus import TANGENCY_MARGIN
from infra.storage import sql_db
from infra.utils.export import write_csv
from services import workflow as workflow_manager
from services.experiment_service import config_hash

app_logger = logging.getLogger(__name__)

# 各子命令未给出 --p / --s 时的缺省列表
DEFAULT_P = {"limit-pinf": "10", "limit-p1": "1.2"}
DEFAULT_S = {"limit-pinf": "0,0.2,0.4"}
SINGLE_P = {"solve", "sweep", "shape-deriv", "fucik-check", "mesh-info"}
SINGLE_S = {"mesh-info"}
OPTIONAL_R0 = {"fucik-check"}


class UsageError(ConfigurationError):
    """命令行参数不合法 (退出码 2，且在任何计算开始之前)"""
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_values(text: str) -> List[float]:
    """
    解析数值列表：单值 "0.3"、逗号列表 "0,0.2,0.4"，或区间 "start:stop:step"。
    区间包含在半个步长之内的终点，各值四舍五入到 12 位小数以消除累积误差。
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3:
                raise UsageError(f"区间格式应为 start:stop:step，实际 '{text}'")
            start, stop, step = parts
            if not step > 0.0 or stop < start:
                raise UsageError(f"区间 '{text}' 需要 step > 0 且 stop ≥ start")
            count = int(math.floor((stop - start) / step + 0.5))
            return [round(start + k * step, 12) for k in range(count + 1)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"无法解析数值列表 '{text}': {e}")


def parse_resolution(text: str):
    try:
        n_radial, n_angular = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"网格分辨率格式应为 NxM，实际 '{text}'")
    if n_radial < 2 or n_angular < 8 or n_angular % 2:
        raise UsageError(f"网格分辨率需要 N ≥ 2、M ≥ 8 且 M 为偶数，实际 {n_radial}x{n_angular}")
    return n_radial, n_angular


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--R1", type=float, default=1.0, help="外球半径 (默认 1)")
    common.add_argument("--R0", type=float, default=None, help="内球半径")
    common.add_argument("--s", default=None, help="偏心距：单值、逗号列表或 start:stop:step")
    common.add_argument("--p", default=None, help="指数 p：单值或列表")
    common.add_argument("--res", default=None, help="网格分辨率 NxM (径向 x 角向)")
    common.add_argument("--tol", type=float, default=None, help="相对收敛阈值")
    common.add_argument("--max-iter", type=int, default=None, help="最大迭代次数")
    common.add_argument("--epsilon", type=float, default=None, help="p<2 时的梯度正则化 ε")
    common.add_argument("--initial", choices=("tent", "ones"), default=None, help="初值类型")
    common.add_argument("--output", "-o", default=None, help="CSV 输出路径 (缺省为标准输出)")
    common.add_argument("--emit-mesh", default=None, metavar="PATH", help="转储网格到文本文件")
    common.add_argument("--jobs", type=int, default=None, help="并发求解数上限")
    common.add_argument("--fd", action="store_true", help="sweep 附加有限差分列")
    common.add_argument("--ds", type=float, default=None, help="有限差分步长")
    common.add_argument("--s-shift", type=float, default=None, help="fucik-check 的内孔平移量")
    common.add_argument("--config", default=None, help="替代 default.yaml 的配置文件")
    common.add_argument("--log-level", default=None, help="日志级别 (DEBUG/INFO/WARNING)")
    common.add_argument("--db", default=None, help="SQLite 运行存档路径")

    parser = _Parser(prog="eccentra", description="偏心圆环上 p-Laplace 第一特征值的数值实验")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    helps = {
        "solve": "求第一特征对",
        "sweep": "λ1 关于 s 的单调性扫描",
        "shape-deriv": "两个边界公式与有限差分的导数交叉检验",
        "limit-pinf": "p→∞ 极限检验",
        "limit-p1": "p→1 极限检验",
        "fucik-check": "Fučik 节点分裂检验",
        "mesh-info": "网格统计信息",
    }
    for name in workflow_manager.STEPS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def build_run_config(args: argparse.Namespace, full_config: dict) -> RunConfig:
    """合并配置与命令行参数，并在任何计算开始前完成全部校验"""
    name = args.subcommand
    if name is None:
        raise UsageError("缺少子命令")
    solver = full_config.get("solver", {})
    mesh = full_config.get("mesh", {})
    experiments = full_config.get("experiments", {})

    p_values = parse_values(args.p or DEFAULT_P.get(name, repr(float(solver.get("p", 2.0)))))
    s_values = parse_values(args.s or DEFAULT_S.get(name, "0"))
    if args.res:
        n_radial, n_angular = parse_resolution(args.res)
    else:
        n_radial, n_angular = parse_resolution(f"{mesh.get('n_radial', 32)}x{mesh.get('n_angular', 128)}")

    if not p_values or any(not p > 1.0 for p in p_values):
        raise UsageError(f"p 必须大于 1，实际 {p_values}")
    if name in SINGLE_P and len(p_values) != 1:
        raise UsageError(f"{name} 只接受单个 p")
    if not s_values or any(s < 0.0 for s in s_values):
        raise UsageError(f"s 必须非负，实际 {s_values}")
    if name in SINGLE_S and len(s_values) != 1:
        raise UsageError(f"{name} 只接受单个 s")
    if len(s_values) > 1 and any(b <= a for a, b in zip(s_values, s_values[1:])):
        raise UsageError(f"s 列表必须严格递增: {s_values}")

    if not args.R1 > 0.0:
        raise UsageError(f"R1 必须为正，实际 {args.R1}")
    if args.R0 is None and name not in OPTIONAL_R0:
        raise UsageError(f"{name} 需要 --R0")
    if args.R0 is not None:
        try:
            AnnulusSpec(args.R1, args.R0)
        except EccentraError as e:
            raise UsageError(str(e))
        if name in ("solve", "mesh-info"):
            upper = args.R1 - args.R0 - float(mesh.get("tangency_margin", TANGENCY_MARGIN)) * args.R1
            if s_values[-1] > upper:
                raise UsageError(f"s={s_values[-1]} 超出包含区间 [0, {upper:.12g}]")
        elif name != "fucik-check":
            upper = args.R1 - args.R0 - experiments.get("sweep_edge_margin", 0.05) * args.R1
            if s_values[-1] > upper:
                raise UsageError(f"s={s_values[-1]} 超出扫描区间 [0, {upper:.12g}]")

    jobs = args.jobs if args.jobs is not None else int(full_config.get("cli", {}).get("jobs", 1))
    if jobs < 1:
        raise UsageError(f"--jobs 必须为正整数，实际 {jobs}")
    if args.tol is not None and not args.tol > 0.0:
        raise UsageError(f"--tol 必须为正，实际 {args.tol}")
    if args.max_iter is not None and args.max_iter < 1:
        raise UsageError(f"--max-iter 必须为正整数，实际 {args.max_iter}")
    if args.epsilon is not None and args.epsilon < 0.0:
        raise UsageError(f"--epsilon 必须非负，实际 {args.epsilon}")
    ds = args.ds if args.ds is not None else experiments.get("fd_step", 0.01)
    if not ds > 0.0:
        raise UsageError(f"--ds 必须为正，实际 {ds}")
    s_shift = args.s_shift if args.s_shift is not None else 0.05
    if s_shift < 0.0:
        raise UsageError(f"--s-shift 必须非负，实际 {s_shift}")

    return RunConfig(
        subcommand=name,
        R1=args.R1,
        R0=args.R0,
        s_values=s_values,
        p_values=p_values,
        n_radial=n_radial,
        n_angular=n_angular,
        tol=args.tol if args.tol is not None else solver.get("tol"),
        max_iter=args.max_iter if args.max_iter is not None else solver.get("max_iter"),
        epsilon=args.epsilon,
        initial=args.initial or solver.get("initial"),
        output=args.output,
        emit_mesh=args.emit_mesh,
        jobs=jobs,
        with_fd=args.fd,
        ds=ds,
        s_shift=s_shift,
        db=args.db,
    )


def canonical_config(rc: RunConfig) -> str:
    """
    可复现运行的规范参数串。只包含影响结果的量：
    输出路径、日志级别、存档路径与并发数不改变计算结果，因此不计入。
    """
    values = lambda xs: ",".join(repr(float(x)) for x in xs)
    parts = [
        rc.subcommand,
        f"--R1 {rc.R1!r}",
        f"--R0 {rc.R0!r}" if rc.R0 is not None else "",
        f"--s {values(rc.s_values)}",
        f"--p {values(rc.p_values)}",
        f"--res {rc.n_radial}x{rc.n_angular}",
        f"--tol {rc.tol!r}",
        f"--max-iter {rc.max_iter!r}",
        f"--epsilon {rc.epsilon!r}" if rc.epsilon is not None else "",
        f"--initial {rc.initial}",
    ]
    if rc.subcommand == "shape-deriv" or rc.with_fd:
        parts.append(f"--ds {rc.ds!r}")
    if rc.with_fd:
        parts.append("--fd")
    if rc.subcommand == "fucik-check":
        parts.append(f"--s-shift {rc.s_shift!r}")
    return " ".join(p for p in parts if p)


def run(argv: Optional[List[str]] = None) -> int:
    """解析参数、执行子命令、写出 CSV，返回退出码"""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        # 公共参数只挂在子解析器上，没有子命令时 args 中不存在 config 等字段
        if args.subcommand is None:
            raise UsageError("缺少子命令")
        full_config = config_manager.load_config(args.config) if args.config else config_manager.load_config()
        config_manager.activate_config(full_config)
        log_section = full_config.get("logging", {})
        logger_config.setup_logging(args.log_level or log_section.get("level", "INFO"),
                                    log_section.get("file", logger_config.LOG_FILE))
        run_config = build_run_config(args, full_config)
    except SystemExit as e:
        return int(e.code or 0)
    except ValueError as e:
        print(f"eccentra: 参数错误: {e}\n", file=sys.stderr)
        parser.print_help(sys.stderr)
        return workflow_manager.EXIT_USAGE

    config_string = canonical_config(run_config)
    app_logger.info(f"运行: {config_string}")
    try:
        outcome = workflow_manager.run_step(run_config.subcommand, run_config, full_config, config_string)
    except ConfigurationError as e:
        print(f"eccentra: 参数错误: {e}", file=sys.stderr)
        return workflow_manager.EXIT_USAGE
    except (NonConvergedError, OracleError) as e:
        print(f"eccentra: 无法完成计算: {e}", file=sys.stderr)
        return workflow_manager.EXIT_NONCONVERGED
    except EccentraError as e:
        app_logger.error(f"执行 {run_config.subcommand} 失败: {e}", exc_info=True)
        print(f"eccentra: {e}", file=sys.stderr)
        return workflow_manager.EXIT_NONCONVERGED

    write_csv(outcome.header, outcome.rows, config_string, path=run_config.output, stream=sys.stdout)
    if run_config.db:
        sql_db.archive_run(run_config.db, run_config.subcommand, config_string, config_hash(config_string),
                           outcome.header, outcome.rows, outcome.verdict, outcome.exit_code)
    return outcome.exit_code


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
