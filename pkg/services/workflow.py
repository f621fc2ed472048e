"""
工作流协调中心 (Workflow Manager)
系统的 Facade 层，负责将 CLI 子命令分发至具体的 Service，并把结果整理为 CSV 行与退出码。
不做任何参数解析，也不直接写文件以外的输出。
"""
from __future__ import annotations

import logging
from typing import Optional

from core.exceptions import EccentraError, ConfigurationError, NonConvergedError
from core.schemas import AnnulusSpec, RunConfig, SolverConfig, StepOutcome, SweepTable
from infra.mesh.annulus import generate_annulus_mesh, mesh_summary
from infra.utils.export import SWEEP_HEADER, sweep_row_cells, dump_mesh
from services.eigen_service import solve_many
from services.experiment_service import ExperimentService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3

STEPS = ("solve", "sweep", "shape-deriv", "limit-pinf", "limit-p1", "fucik-check", "mesh-info")

LIMIT_PINF_HEADER = ("p", "s", "lambda", "lambda_root", "target", "ratio", "iterations", "converged")
LIMIT_P1_HEADER = ("p", "s", "lambda", "target", "rel_error", "iterations", "converged")
QUANTITY_HEADER = ("quantity", "value")


def verdict_exit_code(verdict: Optional[bool]) -> int:
    """None (无法判定) → 3，False (判定失败) → 1，True → 0"""
    if verdict is None:
        return EXIT_NONCONVERGED
    return EXIT_OK if verdict else EXIT_VERDICT


def solver_config(rc: RunConfig, full_config: dict, p: float) -> SolverConfig:
    """solver 配置段 + 命令行覆盖 (非 None 的值优先)"""
    return SolverConfig.from_config(
        full_config.get("solver", {}), p=p, tol=rc.tol, max_iter=rc.max_iter,
        epsilon=rc.epsilon, initial=rc.initial,
    )


def _single_p(rc: RunConfig) -> float:
    if len(rc.p_values) != 1:
        raise ConfigurationError(f"子命令 {rc.subcommand} 只接受单个 p，实际 {rc.p_values}")
    return rc.p_values[0]


def _emit_mesh(rc: RunConfig, spec: AnnulusSpec):
    if rc.emit_mesh:
        dump_mesh(generate_annulus_mesh(spec, *rc.resolution), rc.emit_mesh)


def _run_solve(rc: RunConfig, full_config: dict) -> StepOutcome:
    p = _single_p(rc)
    spec = AnnulusSpec(rc.R1, rc.R0)
    results = solve_many([(spec, s) for s in rc.s_values], rc.resolution, solver_config(rc, full_config, p), rc.jobs)
    _emit_mesh(rc, spec.with_offset(rc.s_values[0]))
    rows = [[s, r.lam, None, None, None, r.iterations, r.converged] for s, r in zip(rc.s_values, results)]
    converged = all(r.converged for r in results)
    return StepOutcome(header=SWEEP_HEADER, rows=rows, verdict=None,
                       exit_code=EXIT_OK if converged else EXIT_NONCONVERGED)


def _sweep_table(rc: RunConfig, full_config: dict, config_string: str, with_fd: bool) -> SweepTable:
    p = _single_p(rc)
    return ExperimentService.sweep_lambda_vs_s(
        rc.R1, rc.R0, p, rc.s_values, rc.resolution, solver_config(rc, full_config, p),
        workers=rc.jobs, with_fd=with_fd, ds=rc.ds, config_string=config_string,
    )


def _run_sweep(rc: RunConfig, full_config: dict, config_string: str) -> StepOutcome:
    table = _sweep_table(rc, full_config, config_string, rc.with_fd)
    _emit_mesh(rc, AnnulusSpec(rc.R1, rc.R0, rc.s_values[0]))
    return StepOutcome(header=SWEEP_HEADER, rows=[sweep_row_cells(r) for r in table.rows],
                       verdict=table.verdict, exit_code=verdict_exit_code(table.verdict), failures=table.failures)


def _run_shape_deriv(rc: RunConfig, full_config: dict, config_string: str) -> StepOutcome:
    table = _sweep_table(rc, full_config, config_string, with_fd=True)
    verdict, failures = ExperimentService.derivative_check(table)
    return StepOutcome(header=SWEEP_HEADER, rows=[sweep_row_cells(r) for r in table.rows],
                       verdict=verdict, exit_code=verdict_exit_code(verdict), failures=failures)


def _run_limit_pinf(rc: RunConfig, full_config: dict) -> StepOutcome:
    base = solver_config(rc, full_config, rc.p_values[-1])
    report = ExperimentService.limit_p_infinity_check(rc.R1, rc.R0, rc.s_values, rc.p_values,
                                                      rc.resolution, base, workers=rc.jobs)
    rows = [[c.p, c.s, c.lam, c.lambda_root, c.target, c.lambda_root / c.target, c.iterations, c.converged]
            for c in report.cells]
    return StepOutcome(header=LIMIT_PINF_HEADER, rows=rows, verdict=report.verdict,
                       exit_code=verdict_exit_code(report.verdict), failures=report.failures)


def _run_limit_p1(rc: RunConfig, full_config: dict) -> StepOutcome:
    base = solver_config(rc, full_config, rc.p_values[-1])
    report = ExperimentService.limit_p_1_check(rc.R1, rc.R0, rc.p_values, rc.resolution, base,
                                               workers=rc.jobs, s_values=rc.s_values)
    rows = [[c.p, c.s, c.lam, c.target, abs(c.lam - c.target) / c.target, c.iterations, c.converged]
            for c in report.cells]
    return StepOutcome(header=LIMIT_P1_HEADER, rows=rows, verdict=report.verdict,
                       exit_code=verdict_exit_code(report.verdict), failures=report.failures)


def _run_fucik(rc: RunConfig, full_config: dict) -> StepOutcome:
    p = _single_p(rc)
    report = ExperimentService.fucik_nodal_split_check(rc.R1, p, rc.s_shift, rc.resolution,
                                                       solver_config(rc, full_config, p), R0=rc.R0, workers=rc.jobs)
    rows = [
        ["R1", report.R1],
        ["R0", report.R0],
        ["p", report.p],
        ["s_shift", report.s_shift],
        ["split_radius", report.split_radius],
        ["lambda_level", report.lambda_level],
        ["lambda_out_oracle", report.lambda_out_oracle],
        ["lambda_out_0", report.lambda_out_0],
        ["lambda_out_s", report.lambda_out_s],
        ["lambda_in_0", report.lambda_in_0],
        ["lambda_in_s", report.lambda_in_s],
        ["converged", report.converged],
        ["verdict", report.verdict],
        ["note", report.note or None],
    ]
    exit_code = EXIT_OK if report.note == "equality" else verdict_exit_code(report.verdict)
    return StepOutcome(header=QUANTITY_HEADER, rows=rows, verdict=report.verdict,
                       exit_code=exit_code, failures=report.failures)


def _run_mesh_info(rc: RunConfig) -> StepOutcome:
    mesh = generate_annulus_mesh(AnnulusSpec(rc.R1, rc.R0, rc.s_values[0]), *rc.resolution)
    if rc.emit_mesh:
        dump_mesh(mesh, rc.emit_mesh)
    rows = [[k, v] for k, v in mesh_summary(mesh).items()]
    return StepOutcome(header=QUANTITY_HEADER, rows=rows)


def run_step(step_name: str, run_config: RunConfig, full_config: dict, config_string: str = "") -> StepOutcome:
    """
    业务逻辑统一入口点。

    Args:
        step_name: 子命令名称
        run_config: 已校验的运行配置
        full_config: 全局配置字典
        config_string: 规范配置串 (写入 CSV 首行并参与摘要)

    Raises:
        ConfigurationError: 参数组合不被该子命令接受 (退出码 2)。
        NonConvergedError / OracleError: 无法完成计算 (退出码 3)。
    """
    logger.info(f"路由请求: {step_name} (R1={run_config.R1}, R0={run_config.R0}, 网格={run_config.resolution})")

    try:
        if step_name == "solve":
            outcome = _run_solve(run_config, full_config)
        elif step_name == "sweep":
            outcome = _run_sweep(run_config, full_config, config_string)
        elif step_name == "shape-deriv":
            outcome = _run_shape_deriv(run_config, full_config, config_string)
        elif step_name == "limit-pinf":
            outcome = _run_limit_pinf(run_config, full_config)
        elif step_name == "limit-p1":
            outcome = _run_limit_p1(run_config, full_config)
        elif step_name == "fucik-check":
            outcome = _run_fucik(run_config, full_config)
        elif step_name == "mesh-info":
            outcome = _run_mesh_info(run_config)
        else:
            raise ConfigurationError(f"未知的子命令: {step_name}")

        for failure in outcome.failures:
            logger.warning(f"{step_name}: {failure}")
        logger.info(f"{step_name} 完成: {len(outcome.rows)} 行, 判定={outcome.verdict}, 退出码={outcome.exit_code}")
        return outcome

    except (ConfigurationError, NonConvergedError):
        raise
    except EccentraError as e:
        logger.error(f"执行 {step_name} 失败: {e}", exc_info=True)
        raise
