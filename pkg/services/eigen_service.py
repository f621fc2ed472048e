"""
特征对求解服务 (Eigen Service)
在边界为零的非负 P1 场上极小化离散 Rayleigh 商，求 p-Laplace 第一 Dirichlet 特征对。
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import splu

from core.exceptions import SolverError
from core.schemas import AnnulusSpec, Mesh, ScalarField, SolverConfig, EigenResult
from infra.fem.p1 import P1Operators, get_operators
from infra.mesh.annulus import generate_annulus_mesh

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 500


def _norm_p(ops: P1Operators, u: np.ndarray, p: float) -> float:
    """离散 p-范数 (Σ_v m_v |u_v|^p)^{1/p}"""
    return float(ops.mass @ np.abs(u) ** p) ** (1.0 / p)


def _energies(ops: P1Operators, u: np.ndarray, p: float) -> Tuple[float, float, np.ndarray, np.ndarray]:
    """返回 (N, D, g, |g|)：N = Σ|T|·|∇u|_T^p，D = Σ|T|·avg_T(|u|^p)"""
    g = ops.gradients(u)
    gn = np.sqrt(g[:, 0] ** 2 + g[:, 1] ** 2)
    N = float(ops.areas @ gn ** p)
    D = float(ops.mass @ np.abs(u) ** p)
    return N, D, g, gn


def _flux_weights(gn: np.ndarray, p: float, eps: float) -> np.ndarray:
    """
    下降方向中的 |∇u|^{p−2}。p < 2 时用 (|∇u|² + ε²)^{(p−2)/2} 正则化；
    ε = 0 且 |∇u| = 0 时取 0 (对应的通量 |∇u|^{p−2}∇u 本身为 0)。
    """
    if p == 2.0:
        return np.ones_like(gn)
    if p < 2.0:
        if eps > 0.0:
            return (gn ** 2 + eps ** 2) ** ((p - 2.0) / 2.0)
        out = np.zeros_like(gn)
        nz = gn > 0.0
        out[nz] = gn[nz] ** (p - 2.0)
        return out
    return gn ** (p - 2.0)


def _metric_weights(ops: P1Operators, gn: np.ndarray, p: float, eps: float) -> np.ndarray:
    """度量刚度的滞后权重，下限 δ 取 ε 与 1e−3 倍均方根梯度中的较大者"""
    if p == 2.0:
        return np.ones_like(gn)
    rms = np.sqrt(float(ops.areas @ gn ** 2) / float(ops.areas.sum()))
    delta = max(eps, 1.0e-3 * rms)
    return (gn ** 2 + delta ** 2) ** ((p - 2.0) / 2.0)


def _initial_field(mesh: Mesh, kind: str) -> np.ndarray:
    """tent: 到内外圆周距离的较小者；ones: 内部顶点取 1。边界顶点均为 0"""
    spec = mesh.spec
    x = mesh.vertices
    if kind == "tent":
        d_inner = np.abs(np.hypot(x[:, 0] - spec.s, x[:, 1]) - spec.R0)
        d_outer = np.abs(spec.R1 - np.hypot(x[:, 0], x[:, 1]))
        u = np.minimum(d_inner, d_outer)
    else:
        u = np.ones(mesh.n_vertices)
    u[mesh.boundary_mask()] = 0.0
    return u


class EigenService:
    @staticmethod
    def rayleigh_quotient(mesh: Mesh, field: ScalarField, p: float) -> float:
        """
        离散 Rayleigh 商 Σ_T |T|·|∇u|_T^p / Σ_T |T|·avg_T(|u|^p)。
        avg_T 为三角形角点平均求积，等价于顶点集中质量。

        Raises:
            SolverError: 标量场与网格不匹配，或分母为零。
        """
        if field.values.shape != (mesh.n_vertices,):
            raise SolverError(f"标量场长度 {field.values.shape} 与网格顶点数 {mesh.n_vertices} 不一致")
        ops = get_operators(mesh)
        N, D, _, _ = _energies(ops, field.values, p)
        if D == 0.0:
            raise SolverError("Rayleigh 商分母为零 (标量场恒为零)")
        return N / D

    @staticmethod
    def solve_first_eigenpair(mesh: Mesh, config: Optional[SolverConfig] = None) -> EigenResult:
        """
        归一化投影梯度下降求第一特征对。

        每步沿 Rayleigh 商在加权 H¹₀ 度量下的梯度方向回溯，直到商值下降；
        内部负值截断为 0 后重新做 p-范数归一化，使迭代保持在正锥内。
        相对变化小于 tol 或达到 max_iter 时停止。未收敛时返回 converged=False 的部分结果。
        """
        config = config or SolverConfig()
        p = float(config.p)
        eps = config.regularization(mesh.spec.R1)
        ops = get_operators(mesh)
        interior = ops.interior
        if interior.size == 0:
            raise SolverError("网格没有内部顶点")

        u = _initial_field(mesh, config.initial)
        u /= _norm_p(ops, u, p)
        N, D, g, gn = _energies(ops, u, p)
        lam = N / D
        history = [lam]
        logger.info(
            f"开始求解: s={mesh.spec.s}, p={p}, 网格=({mesh.n_radial},{mesh.n_angular}), "
            f"初值={config.initial}, λ0={lam:.6g}"
        )

        lu = None
        wm = None
        stale = False
        residual = float("inf")
        converged = False
        iterations = 0

        for it in range(1, config.max_iter + 1):
            iterations = it
            if lu is None or (p != 2.0 and (stale or (it - 1) % config.metric_refresh == 0)):
                wm = _metric_weights(ops, gn, p, eps)
                K = ops.stiffness(wm)[interior][:, interior]
                lu = splu(K.tocsc())

            w = _flux_weights(gn, p, eps)
            grad_N = p * ops.divergence(w[:, None] * g)
            grad_D = p * ops.mass * np.sign(u) * np.abs(u) ** (p - 1.0)
            grad = (grad_N - lam * grad_D)[interior] / D
            direction = lu.solve(grad)

            tau0 = D * float(ops.areas @ (wm * gn ** 2)) / (p * N)
            tau = tau0
            accepted = False
            shrinks = 0
            while tau >= config.min_step_ratio * tau0:
                v = u.copy()
                v[interior] = np.maximum(u[interior] - tau * direction, 0.0)
                norm = _norm_p(ops, v, p)
                if norm > 0.0:
                    v /= norm
                    N_v, D_v, g_v, gn_v = _energies(ops, v, p)
                    lam_v = N_v / D_v
                    if lam_v < lam:
                        accepted = True
                        break
                tau *= config.step_shrink
                shrinks += 1

            if not accepted:
                # 回溯步长缩到 min_step_ratio 以下仍无下降：在当前迭代点宣告收敛
                logger.debug(f"第 {it} 步回溯停滞，λ={lam:.12g}")
                converged = True
                break

            # 需要多次回溯说明滞后度量已偏离当前梯度，下一步重新分解
            stale = shrinks > 1
            residual = (lam - lam_v) / lam_v
            u, lam = v, lam_v
            N, D, g, gn = N_v, D_v, g_v, gn_v
            history.append(lam)

            if it % PROGRESS_EVERY == 0:
                logger.debug(f"迭代 {it}: λ={lam:.12g}, 相对变化={residual:.3e}")
            if residual < config.tol:
                converged = True
                break

        if np.any(u[interior] <= 0.0):
            logger.warning(f"特征函数在 {int(np.count_nonzero(u[interior] <= 0.0))} 个内部顶点上非正")
        if converged:
            logger.info(f"求解完成: λ={lam:.12g}, 迭代 {iterations} 次")
        else:
            logger.warning(f"达到最大迭代次数 {config.max_iter} 仍未收敛: λ={lam:.12g}, 相对变化={residual:.3e}")

        return EigenResult(
            lam=lam,
            field=ScalarField(u, mesh),
            iterations=iterations,
            residual=residual,
            converged=converged,
            config=config,
            history=history,
        )


def solve_on_offset(spec: AnnulusSpec, s: float, resolution: Tuple[int, int],
                    config: Optional[SolverConfig] = None) -> EigenResult:
    """在偏心距 s 处生成网格并求解 (顶层函数，可被进程池序列化)"""
    mesh = generate_annulus_mesh(spec.with_offset(s), *resolution)
    return EigenService.solve_first_eigenpair(mesh, config)


def solve_many(tasks: List[Tuple[AnnulusSpec, float]], resolution: Tuple[int, int],
               config: Optional[SolverConfig] = None, workers: int = 1) -> List[EigenResult]:
    """
    批量独立求解。workers > 1 时使用进程池，结果总是按输入顺序返回；
    每个求解都是确定性的，因此与串行结果逐位一致。
    """
    if workers <= 1 or len(tasks) <= 1:
        return [solve_on_offset(spec, s, resolution, config) for spec, s in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        futures = [pool.submit(solve_on_offset, spec, s, resolution, config) for spec, s in tasks]
        return [f.result() for f in futures]
