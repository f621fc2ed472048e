"""
形状导数服务 (Shape Derivative Service)
由离散特征对计算 λ1'(s) 的两个边界积分公式 (内球平移、外球平移)，以及有限差分参照值。
"""
from __future__ import annotations

import logging
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from core.exceptions import ShapeDerivativeError, NonConvergedError
from core.schemas import (
    AnnulusSpec, Mesh, ScalarField, EigenResult, BoundaryFlux, SolverConfig, INNER, OUTER, parse_tag,
)
from infra.fem.p1 import get_operators
from infra.mesh import topology
from infra.mesh.annulus import tangency_margin
from services.eigen_service import solve_many

logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def _boundary_cells(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """
    每条边界边 (与 mesh.boundary_edges 同序) 所在四边形单元的两个三角形：
    唯一相邻的三角形，以及隔着对角线的同单元三角形。
    结构化网格中单元 c 的两个三角形编号为 2c 与 2c+1。
    """
    adjacency = topology.edge_triangle_map(mesh)
    owners = np.empty(mesh.boundary_edges.shape[0], dtype=np.int64)
    for k, (u, v) in enumerate(mesh.boundary_edges):
        tris = adjacency.get((min(u, v), max(u, v)), [])
        if len(tris) != 1:
            raise ShapeDerivativeError(f"边界边 ({u},{v}) 有 {len(tris)} 个相邻三角形，应恰好为 1 个")
        owners[k] = tris[0]
    return owners, owners ^ 1


def boundary_flux(mesh: Mesh, field: ScalarField, loop, flip_normals: bool = False) -> BoundaryFlux:
    """
    逐边法向导数 ∂u/∂n = ⟨∇u|_C, n⟩，∇u|_C 为该边所在四边形单元上两个三角形梯度的面积加权平均。
    单元平均等于 (1/|C|)∮_{∂C} u·n，只依赖单元四个顶点上的值，与对角线方向无关，
    上下半圆的两种剖分因此给出一致的通量。
    n 为在边中点处取的精确圆周法向 (Ω_s 的外法向；内环上指向内球圆心一侧)。
    flip_normals 只用于方向约定的审计。
    """
    tag = parse_tag(loop)
    select = mesh.boundary_tags == tag
    edges = mesh.boundary_edges[select]
    owners, partners = (cells[select] for cells in _boundary_cells(mesh))

    x0 = mesh.vertices[edges[:, 0]]
    x1 = mesh.vertices[edges[:, 1]]
    midpoints = 0.5 * (x0 + x1)
    lengths = np.linalg.norm(x1 - x0, axis=1)

    if tag == OUTER:
        radial = midpoints
        sign = 1.0
    else:
        radial = midpoints - np.array([mesh.spec.s, 0.0])
        sign = -1.0
    normals = sign * radial / np.linalg.norm(radial, axis=1)[:, None]
    if flip_normals:
        normals = -normals

    ops = get_operators(mesh)
    g = ops.gradients(field.values)
    a_own, a_par = ops.areas[owners, None], ops.areas[partners, None]
    grads = (a_own * g[owners] + a_par * g[partners]) / (a_own + a_par)
    dudn = np.einsum("ij,ij->i", grads, normals)
    return BoundaryFlux(tag=tag, lengths=lengths, normals=normals, dudn=dudn, midpoints=midpoints)


def _require_converged(result: EigenResult):
    if not result.converged:
        raise ShapeDerivativeError(
            f"形状导数公式需要收敛的特征对: iterations={result.iterations}, residual={result.residual:.3e}"
        )


def _hadamard_sum(flux: BoundaryFlux, p: float) -> float:
    """Σ_edges |∂u/∂n|^p · n1 · |e|"""
    return float(np.sum(np.abs(flux.dudn) ** p * flux.n1 * flux.lengths))


class ShapeService:
    @staticmethod
    def dlambda_ds_inner(mesh: Mesh, result: EigenResult, flux: Optional[BoundaryFlux] = None) -> float:
        """λ1'(s) = −(p−1) ∮_{∂B_{R0}(s·e1)} |∂u/∂n|^p n1 dS，n1 取 Ω_s 在内边界上的外法向分量"""
        _require_converged(result)
        flux = flux or boundary_flux(mesh, result.field, INNER)
        p = result.config.p
        return -(p - 1.0) * _hadamard_sum(flux, p)

    @staticmethod
    def dlambda_ds_outer(mesh: Mesh, result: EigenResult, flux: Optional[BoundaryFlux] = None) -> float:
        """λ1'(s) = +(p−1) ∮_{∂B_{R1}(0)} |∂u/∂n|^p n1 dS，n1 取外球的外法向分量"""
        _require_converged(result)
        flux = flux or boundary_flux(mesh, result.field, OUTER)
        p = result.config.p
        return (p - 1.0) * _hadamard_sum(flux, p)

    @staticmethod
    def finite_difference_dlambda(spec: AnnulusSpec, p: float, ds: float, resolution: Tuple[int, int],
                                  config: Optional[SolverConfig] = None, workers: int = 1) -> float:
        """
        中心差分 (λ(s+ds) − λ(s−ds)) / (2ds)，两次求解使用相同分辨率与参数；
        s = 0 时取单侧差分 (λ(ds) − λ(0)) / ds，其值约为 λ''(0)·ds/2，随 ds 线性趋于零。

        Raises:
            ShapeDerivativeError: s ± ds 超出 [0, R1 − R0 − margin]。
            NonConvergedError: 任一求解未收敛。
        """
        if not ds > 0.0:
            raise ShapeDerivativeError(f"差分步长必须为正，实际 ds={ds}")
        s = spec.s
        upper = spec.R1 - spec.R0 - tangency_margin() * spec.R1
        if s + ds > upper or (s > 0.0 and s - ds < 0.0):
            raise ShapeDerivativeError(f"差分点 s±ds = {s}±{ds} 超出区间 [0, {upper}]")
        config = SolverConfig(p=p) if config is None else config
        if config.p != p:
            raise ShapeDerivativeError(f"差分指数 p={p} 与求解配置 p={config.p} 不一致")

        points = (ds, 0.0) if s == 0.0 else (s + ds, s - ds)
        plus, minus = solve_many([(spec, points[0]), (spec, points[1])], resolution, config, workers)
        for r, at in ((plus, points[0]), (minus, points[1])):
            if not r.converged:
                raise NonConvergedError(f"有限差分在 s={at} 处的求解未收敛", result=r)

        value = (plus.lam - minus.lam) / (points[0] - points[1])
        logger.info(f"有限差分 λ'({s}) ≈ {value:.10g} (ds={ds}, p={p})")
        return value
