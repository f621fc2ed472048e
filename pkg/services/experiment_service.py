"""
实验服务 (Experiment Service)
单调性扫描、p→∞ / p→1 极限检验、镜像对称审计与 Fučik 节点分裂检验。
每个实验都是 (输入, 配置) 的纯函数，重复运行得到逐位一致的结果。
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.loader import get_section
from core import geometry
from core.exceptions import ConfigurationError
from core.schemas import (
    AnnulusSpec, Mesh, ScalarField, EigenResult, SolverConfig, RadialProblem,
    SweepRow, SweepTable, LimitCell, LimitReport, FucikReport,
)
from infra.mesh.annulus import mirror_index
from infra.radial.shooting import nodal_split
from services.eigen_service import solve_many
from services.shape_service import ShapeService

logger = logging.getLogger(__name__)

RADIAL_KEYS = ("tol", "steps", "lambda_max", "start_offset")


def config_hash(config_string: str) -> str:
    """规范配置字符串的 SHA-256 摘要"""
    return hashlib.sha256(config_string.encode("utf-8")).hexdigest()


def radial_template(p: float, dim: int = 2, section: Optional[dict] = None) -> RadialProblem:
    """按 radial 配置段构造单位球问题，作为打靶参数模板"""
    section = get_section("radial") if section is None else section
    return RadialProblem.ball(1.0, p, dim, **{k: section[k] for k in RADIAL_KEYS if k in section})


def _settings() -> dict:
    return get_section("experiments")


def _check_offsets(R1: float, R0: float, s_values: Sequence[float], edge_margin: float):
    """s 必须严格递增并位于 [0, R1 − R0 − edge_margin·R1]"""
    if len(s_values) == 0:
        raise ConfigurationError("s 列表不能为空")
    upper = R1 - R0 - edge_margin * R1
    for s in s_values:
        if not (0.0 <= s <= upper):
            raise ConfigurationError(f"偏心距 s={s} 超出可计算区间 [0, {upper:.12g}]")
    if any(b <= a for a, b in zip(s_values, s_values[1:])):
        raise ConfigurationError(f"s 列表必须严格递增: {list(s_values)}")


def _solve_grid(spec: AnnulusSpec, p_values: Sequence[float], s_values: Sequence[float],
                resolution: Tuple[int, int], config: SolverConfig, workers: int) -> Dict[Tuple[float, float], EigenResult]:
    """对每个 p 批量求解全部 s；同一 p 的求解共享一个 SolverConfig"""
    results = {}
    for p in p_values:
        solved = solve_many([(spec, s) for s in s_values], resolution, replace(config, p=p), workers)
        for s, r in zip(s_values, solved):
            results[(p, s)] = r
    return results


def _strictly_decreasing(values: Sequence[float], margins: Sequence[float]) -> List[int]:
    """返回违反 values[k+1] < values[k] − margins[k] 的下标 k"""
    return [k for k in range(len(values) - 1) if not values[k + 1] < values[k] - margins[k]]


class ExperimentService:
    @staticmethod
    def symmetry_check(mesh: Mesh, result: Union[EigenResult, ScalarField]) -> float:
        """镜像顶点对 (θ_j, −θ_j) 上的最大差异 max|u_i − u_i'| / max|u|"""
        field = result.field if isinstance(result, EigenResult) else result
        u = field.values
        scale = float(np.max(np.abs(u)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(u - u[mirror_index(mesh)]))) / scale

    @staticmethod
    def sweep_lambda_vs_s(R1: float, R0: float, p: float, s_values: Sequence[float], resolution: Tuple[int, int],
                          config: Optional[SolverConfig] = None, workers: int = 1, with_fd: bool = False,
                          ds: Optional[float] = None, config_string: str = "") -> SweepTable:
        """
        逐个 s 求解并计算两个边界公式 (可选有限差分)，判定 λ1(s) 是否严格递减：
        相邻两行满足 λ(s_{k+1}) < λ(s_k) − decrease_margin·tol·λ(s_k)。
        任一行未收敛时 verdict 为 None，行本身照常保留。
        """
        settings = _settings()
        s_values = [float(s) for s in s_values]
        _check_offsets(R1, R0, s_values, settings.get("sweep_edge_margin", 0.05))
        config = replace(config or SolverConfig(), p=p)
        spec = AnnulusSpec(R1, R0)
        ds = ds if ds is not None else settings.get("fd_step", 0.01)

        solved = solve_many([(spec, s) for s in s_values], resolution, config, workers)
        rows = []
        for s, result in zip(s_values, solved):
            row = SweepRow(s=s, lam=result.lam, iterations=result.iterations, converged=result.converged)
            if result.converged:
                row.dlambda_inner = ShapeService.dlambda_ds_inner(result.mesh, result)
                row.dlambda_outer = ShapeService.dlambda_ds_outer(result.mesh, result)
                if with_fd:
                    row.dlambda_fd = ShapeService.finite_difference_dlambda(
                        spec.with_offset(s), p, ds, resolution, config, workers
                    )
            row.symmetry = ExperimentService.symmetry_check(result.mesh, result)
            logger.info(f"扫描行: s={s}, λ={row.lam:.12g}, 迭代={row.iterations}, 收敛={row.converged}")
            rows.append(row)

        if not config_string:
            config_string = (
                f"sweep R1={R1!r} R0={R0!r} p={p!r} s={s_values!r} res={resolution[0]}x{resolution[1]} "
                f"tol={config.tol!r} max_iter={config.max_iter!r}"
            )
        table = SweepTable(
            rows=rows,
            metadata={"R1": R1, "R0": R0, "p": p, "resolution": tuple(resolution), "tol": config.tol},
            config_string=config_string,
            config_hash=config_hash(config_string),
        )
        table.metadata["config_hash"] = table.config_hash

        if not table.all_converged:
            bad = [r.s for r in rows if not r.converged]
            table.failures.append(f"未收敛的行: s={bad}")
            logger.warning(f"扫描判定被未收敛的行污染: s={bad}")
            return table

        margin = settings.get("decrease_margin", 10.0) * config.tol
        lams = [r.lam for r in rows]
        for k in _strictly_decreasing(lams, [margin * lam for lam in lams]):
            table.failures.append(f"λ 在 s={rows[k].s} → {rows[k + 1].s} 处未严格递减: {lams[k]!r} → {lams[k + 1]!r}")
        sym_tol = settings.get("symmetry_tolerance", 1.0e-6)
        for r in rows:
            if r.symmetry > sym_tol:
                table.failures.append(f"s={r.s} 处镜像差异 {r.symmetry:.3e} 超过 {sym_tol:g}")
        table.verdict = not table.failures
        if table.failures:
            logger.warning(f"扫描判定失败: {table.failures}")
        return table

    @staticmethod
    def derivative_check(table: SweepTable) -> Tuple[Optional[bool], List[str]]:
        """
        导数交叉检验：s > 0 的行上三种估计均为负且两两相对差异不超过 derivative_agreement；
        存在 s = 0 行时，两个边界公式在 s = 0 处的量级不超过最大 s 处量级的 zero_derivative_ratio 倍。
        """
        settings = _settings()
        if not table.all_converged:
            return None, ["存在未收敛的行"]
        failures = []
        agreement = settings.get("derivative_agreement", 0.15)
        positive = [r for r in table.rows if r.s > 0.0]
        for r in positive:
            estimates = {"inner": r.dlambda_inner, "outer": r.dlambda_outer, "fd": r.dlambda_fd}
            estimates = {k: v for k, v in estimates.items() if v is not None}
            for name, value in estimates.items():
                if not value < 0.0:
                    failures.append(f"s={r.s}: {name} 导数 {value!r} 非负")
            names = sorted(estimates)
            for i, a in enumerate(names):
                for b in names[i + 1:]:
                    gap = abs(estimates[a] - estimates[b]) / max(abs(estimates[a]), abs(estimates[b]))
                    if gap > agreement:
                        failures.append(f"s={r.s}: {a} 与 {b} 相对差异 {gap:.3f} 超过 {agreement}")

        zero = [r for r in table.rows if r.s == 0.0]
        if zero and positive:
            ratio = settings.get("zero_derivative_ratio", 0.05)
            ref = positive[-1]
            for name in ("dlambda_inner", "dlambda_outer"):
                at0, atref = abs(getattr(zero[0], name)), abs(getattr(ref, name))
                if at0 > ratio * atref:
                    failures.append(f"{name}(0) = {at0:.3e} 超过 {ratio}·|{name}({ref.s})| = {ratio * atref:.3e}")
        if failures:
            logger.warning(f"导数检验失败: {failures}")
        return not failures, failures

    @staticmethod
    def limit_p_infinity_check(R1: float, R0: float, s_values: Sequence[float], p_values: Sequence[float],
                               resolution: Tuple[int, int], config: Optional[SolverConfig] = None,
                               workers: int = 1) -> LimitReport:
        """
        对每个 (p, s) 计算比值 λ^{1/p} / Λ∞(s)，Λ∞(s) = 2/(R1−R0+s)。
        判定：最大 p 上比值全部落在 pinf_ratio_band 内，且 λ^{1/p} 关于 s 严格递减。
        """
        settings = _settings()
        p_values = [float(p) for p in p_values]
        s_values = [float(s) for s in s_values]
        if any(not (2.0 < p <= 64.0) for p in p_values):
            raise ConfigurationError(f"p→∞ 检验要求 p ∈ (2, 64]，实际 {p_values}")
        if any(b <= a for a, b in zip(p_values, p_values[1:])):
            raise ConfigurationError(f"p 列表必须严格递增: {p_values}")
        _check_offsets(R1, R0, s_values, settings.get("sweep_edge_margin", 0.05))
        config = config or SolverConfig()
        spec = AnnulusSpec(R1, R0)

        results = _solve_grid(spec, p_values, s_values, resolution, config, workers)
        cells = []
        for p in p_values:
            for s in s_values:
                r = results[(p, s)]
                target = geometry.lambda_infinity(spec.with_offset(s))
                cells.append(LimitCell(p=p, s=s, lam=r.lam, target=target,
                                       iterations=r.iterations, converged=r.converged))
                logger.info(f"p→∞ 格点: p={p}, s={s}, λ^(1/p)={cells[-1].lambda_root:.8g}, 目标={target:.8g}")

        report = LimitReport(kind="p_infinity", cells=cells, verdict=None)
        targets = [geometry.lambda_infinity(spec.with_offset(s)) for s in s_values]
        report.checks["targets_decreasing"] = not _strictly_decreasing(targets, [0.0] * len(targets))
        if not all(c.converged for c in cells):
            report.failures.append("存在未收敛的格点")
            logger.warning("p→∞ 检验存在未收敛的格点，不作判定")
            return report

        lo, hi = settings.get("pinf_ratio_band", [0.75, 1.35])
        top = [c for c in cells if c.p == p_values[-1]]
        ratios = [c.lambda_root / c.target for c in top]
        report.checks["ratios"] = ratios
        report.checks["ratio_band"] = (lo, hi)
        for c, ratio in zip(top, ratios):
            if not lo <= ratio <= hi:
                report.failures.append(f"p={c.p}, s={c.s}: 比值 {ratio:.4f} 不在 [{lo}, {hi}] 内")
        for k in _strictly_decreasing([c.lambda_root for c in top], [0.0] * len(top)):
            report.failures.append(f"p={top[k].p}: λ^(1/p) 在 s={top[k].s} → {top[k + 1].s} 处未严格递减")
        if not report.checks["targets_decreasing"]:
            report.failures.append("Λ∞ 闭式值未严格递减")
        report.verdict = not report.failures
        if report.failures:
            logger.warning(f"p→∞ 检验失败: {report.failures}")
        return report

    @staticmethod
    def limit_p_1_check(R1: float, R0: float, p_values: Sequence[float], resolution: Tuple[int, int],
                        config: Optional[SolverConfig] = None, workers: int = 1,
                        s_values: Optional[Sequence[float]] = None) -> LimitReport:
        """
        同心圆环 (s=0) 上 λ(p) 趋近 h(0) = 2(R1+R0)/(R1²−R0²)：
        最小 p 处相对误差不超过 p1_band。s_values 中 s > 0 的格点只作为数据输出，不参与判定。
        """
        settings = _settings()
        p_values = [float(p) for p in p_values]
        if any(not (1.0 < p <= 1.5) for p in p_values):
            raise ConfigurationError(f"p→1 检验要求 p ∈ (1, 1.5]，实际 {p_values}")
        if any(b >= a for a, b in zip(p_values, p_values[1:])):
            raise ConfigurationError(f"p 列表必须严格递减: {p_values}")
        s_values = [0.0] + [float(s) for s in (s_values or []) if s > 0.0]
        _check_offsets(R1, R0, s_values, settings.get("sweep_edge_margin", 0.05))
        config = config or SolverConfig()
        spec = AnnulusSpec(R1, R0)
        h0 = geometry.cheeger_upper_bound(spec)

        results = _solve_grid(spec, p_values, s_values, resolution, config, workers)
        cells = []
        for p in p_values:
            for s in s_values:
                r = results[(p, s)]
                cells.append(LimitCell(p=p, s=s, lam=r.lam, target=h0, iterations=r.iterations, converged=r.converged))
                logger.info(f"p→1 格点: p={p}, s={s}, λ={r.lam:.8g}, h(0)={h0:.8g}")

        report = LimitReport(kind="p_one", cells=cells, verdict=None)
        report.checks["h0"] = h0
        report.checks["perimeter_volume_ratio"] = {s: geometry.perimeter_volume_ratio(spec.with_offset(s)) for s in s_values}
        concentric = [c for c in cells if c.s == 0.0]
        if not all(c.converged for c in concentric):
            report.failures.append("同心格点未收敛 (可能受 p<2 正则化影响)")
            logger.warning("p→1 检验存在未收敛的同心格点，不作判定")
            return report

        band = settings.get("p1_band", 0.30)
        smallest = concentric[-1]
        rel_error = abs(smallest.lam - h0) / h0
        report.checks["rel_error"] = rel_error
        if rel_error > band:
            report.failures.append(f"p={smallest.p}: |λ − h(0)|/h(0) = {rel_error:.4f} 超过 {band}")
        report.verdict = not report.failures
        if report.failures:
            logger.warning(f"p→1 检验失败: {report.failures}")
        return report

    @staticmethod
    def fucik_nodal_split_check(R1: float, p: float, s_shift: float, resolution: Tuple[int, int],
                                config: Optional[SolverConfig] = None, R0: Optional[float] = None,
                                workers: int = 1) -> FucikReport:
        """
        节点分裂检验：求径向候选函数的节点界面 R，再在外侧节点圆环 A(R1, R) 上
        比较 λ_out(s_shift) 与 λ_out(0)，严格递减即与 c(t) 的极小性矛盾。
        给定 R0 时区域为圆环 A(R1, R0)，内侧节点圆环 A(R, R0) 同样平移内孔检验。
        """
        settings = _settings()
        radial = get_section("radial")
        config = replace(config or SolverConfig(), p=p)
        if s_shift < 0.0:
            raise ConfigurationError(f"s_shift 必须非负，实际 {s_shift}")

        split = nodal_split(R1, p, 2, R0=R0, template=radial_template(p, 2, radial),
                            tol=radial.get("split_tol", 1.0e-10))
        R = split.radius
        frac = settings.get("fucik_shift_fraction", 0.3)
        if s_shift >= frac * (R1 - R):
            raise ConfigurationError(f"s_shift={s_shift} 过大，需小于 {frac}·(R1 − R) = {frac * (R1 - R):.6g}")
        if R0 is not None and s_shift >= frac * (R - R0):
            raise ConfigurationError(f"s_shift={s_shift} 过大，需小于 {frac}·(R − R0) = {frac * (R - R0):.6g}")

        outer = AnnulusSpec(R1, R)
        inner = AnnulusSpec(R, R0) if R0 is not None else None
        offsets = [0.0] if s_shift == 0.0 else [0.0, s_shift]
        tasks = [(outer, s) for s in offsets] + ([(inner, s) for s in offsets] if inner else [])
        solved = solve_many(tasks, resolution, config, workers)
        out_results, in_results = solved[:len(offsets)], solved[len(offsets):]

        report = FucikReport(
            R1=R1, p=p, s_shift=s_shift, split_radius=R,
            lambda_level=split.lambda_inner,
            lambda_out_oracle=split.lambda_outer,
            lambda_out_0=out_results[0].lam,
            lambda_out_s=out_results[-1].lam,
            verdict=None,
            R0=R0,
            converged=all(r.converged for r in solved),
        )
        if inner is not None:
            report.lambda_in_0 = in_results[0].lam
            report.lambda_in_s = in_results[-1].lam
        logger.info(
            f"Fučik 检验: R={R:.10g}, λ_out(0)={report.lambda_out_0:.10g}, "
            f"λ_out({s_shift})={report.lambda_out_s:.10g}, 径向参照={report.lambda_out_oracle:.10g}"
        )

        if not report.converged:
            report.failures.append("节点圆环上的求解未收敛")
            logger.warning("Fučik 检验存在未收敛的求解，不作判定")
            return report
        if s_shift == 0.0:
            report.note = "equality"
            return report

        margin = settings.get("decrease_margin", 10.0) * config.tol
        pairs = [("out", report.lambda_out_0, report.lambda_out_s)]
        if inner is not None:
            pairs.append(("in", report.lambda_in_0, report.lambda_in_s))
        for name, lam0, lam_s in pairs:
            if not lam_s < lam0 - margin * lam0:
                report.failures.append(f"λ_{name}({s_shift})={lam_s!r} 未严格小于 λ_{name}(0)={lam0!r}")
        report.verdict = not report.failures
        if report.failures:
            logger.warning(f"Fučik 检验失败: {report.failures}")
        return report

