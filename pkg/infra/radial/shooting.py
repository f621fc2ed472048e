"""
径向打靶 (Radial Shooting)
同心圆环与球上 p-Laplace 第一径向 Dirichlet 特征值的一维独立求解器：
    −(r^{N−1}|φ'|^{p−2}φ')' = λ r^{N−1}|φ|^{p−2}φ
以通量 w = |φ'|^{p−2}φ' 为未知量写成一阶系统 (φ, w)，定步长四阶 Runge-Kutta 积分，
在 λ 上先倍增括根、再二分、最后用 Brent 法收敛到 tol。
与二维有限元求解器不共享任何离散代码。
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from core.exceptions import OracleError
from core.schemas import RadialProblem
from infra.radial.rootfind import bisect_predicate, bracketed_root

logger = logging.getLogger(__name__)

# 二分阶段把区间缩到该相对宽度后转入 Brent 法，此时右端点必然低于第二特征值
BISECT_RTOL = 1.0e-3


def _initial_state(prob: RadialProblem, lam: float) -> Tuple[float, float, float]:
    """返回 (r0, φ(r0), w(r0))"""
    r0 = prob.start
    if prob.kind == "annulus":
        return r0, 0.0, 1.0
    # 球心可去奇点：w ≈ −λr/N，φ ≈ 1 − (p−1)/p·(λ/N)^{1/(p−1)}·r^{p/(p−1)}
    p, n = prob.p, prob.dim
    phi = 1.0 - (p - 1.0) / p * (lam / n) ** (1.0 / (p - 1.0)) * r0 ** (p / (p - 1.0))
    return r0, phi, -lam * r0 / n


def integrate(prob: RadialProblem, lam: float, stop_at_zero: bool = True,
              steps: Optional[int] = None) -> Tuple[float, Optional[float]]:
    """
    从起点积分到外半径。

    Returns:
        (φ 的末值, 第一个零点的半径或 None)。stop_at_zero 为真时在第一个零点处提前返回。

    Raises:
        OracleError: 积分出现非有限值。
    """
    p = prob.p
    q = 1.0 / (p - 1.0)
    pm1 = p - 1.0
    c = prob.dim - 1.0
    n = steps or prob.steps
    r, phi, w = _initial_state(prob, lam)
    r_start = r
    h = (prob.R1 - r_start) / n
    copysign = math.copysign

    def rhs(r, phi, w):
        dphi = copysign(abs(w) ** q, w)
        dw = -c * w / r - lam * copysign(abs(phi) ** pm1, phi)
        return dphi, dw

    first_zero = None
    for k in range(n):
        k1p, k1w = rhs(r, phi, w)
        k2p, k2w = rhs(r + 0.5 * h, phi + 0.5 * h * k1p, w + 0.5 * h * k1w)
        k3p, k3w = rhs(r + 0.5 * h, phi + 0.5 * h * k2p, w + 0.5 * h * k2w)
        k4p, k4w = rhs(r + h, phi + h * k3p, w + h * k3w)
        phi_next = phi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        w_next = w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        r_next = r_start + (k + 1) * h
        if not (math.isfinite(phi_next) and math.isfinite(w_next)):
            raise OracleError(f"径向积分溢出: λ={lam}, r={r_next}")
        if first_zero is None and phi_next <= 0.0 and phi > 0.0:
            first_zero = r + h * phi / (phi - phi_next)
            if stop_at_zero:
                return phi_next, first_zero
        r, phi, w = r_next, phi_next, w_next
    return phi, first_zero


def _has_zero(prob: RadialProblem, lam: float) -> bool:
    return integrate(prob, lam, stop_at_zero=True)[1] is not None


def _bracket(prob: RadialProblem) -> Tuple[float, float]:
    """按倍增找到 [λ_lo, λ_hi]：λ_lo 处解无零点，λ_hi 处解在外半径前已有零点"""
    width = prob.R1 - (prob.R0 if prob.kind == "annulus" else 0.0)
    lam = (1.0 / width) ** prob.p
    if _has_zero(prob, lam):
        hi = lam
        lo = 0.5 * lam
        while _has_zero(prob, lo):
            hi, lo = lo, 0.5 * lo
            if lo < 1e-300:
                raise OracleError("λ 区间下界趋于 0 仍有零点")
        return lo, hi
    lo = lam
    hi = 2.0 * lam
    while not _has_zero(prob, hi):
        lo, hi = hi, 2.0 * hi
        if hi > prob.lambda_max:
            raise OracleError(f"在 λ_max={prob.lambda_max:g} 以下找不到特征值区间")
    return lo, hi


def radial_first_eigenvalue(prob: RadialProblem) -> float:
    """
    最小的 λ > 0，使打靶解在外半径处恰好再次为零 (且内部无零点)。
    圆环：φ(R0)=0, φ'(R0)=1；球：φ(0)=1, φ'(0)=0。
    """
    lo, hi = _bracket(prob)
    lo, hi = bisect_predicate(lambda lam: _has_zero(prob, lam), lo, hi, BISECT_RTOL)
    terminal = lambda lam: integrate(prob, lam, stop_at_zero=False)[0]
    # 根的绝对误差不超过 tol·λ/4
    lam = bracketed_root(terminal, lo, hi, xtol=0.25 * prob.tol * lo)
    logger.debug(f"径向特征值: {prob.kind}, R0={prob.R0}, R1={prob.R1}, p={prob.p}, N={prob.dim} → λ={lam:.12g}")
    return lam


@dataclass(frozen=True)
class NodalSplit:
    """径向节点分裂：两侧第一特征值相等的界面半径"""
    radius: float
    lambda_inner: float
    lambda_outer: float

    @property
    def mismatch(self) -> float:
        return abs(self.lambda_inner - self.lambda_outer) / self.lambda_outer


def nodal_split(R1: float, p: float, dim: int = 2, R0: Optional[float] = None,
                template: Optional[RadialProblem] = None, tol: float = 1.0e-10) -> NodalSplit:
    """
    求 R 使内侧 (球 B_R，或给定 R0 时圆环 A(R0,R)) 与外侧圆环 A(R,R1) 的第一特征值相等。
    左侧关于 R 递减、右侧递增，交点唯一。球的特征值按 λ(B_R) = λ(B_1)/R^p 精确缩放。
    """
    base = template or RadialProblem.ball(1.0, p, dim)
    base = replace(base, p=p, dim=dim)
    a = 0.0 if R0 is None else R0
    if not (R1 > a):
        raise OracleError(f"分裂半径搜索需要 R1 > R0，实际 R1={R1}, R0={R0}")

    if R0 is None:
        lam_unit = radial_first_eigenvalue(replace(base, kind="ball", R0=None, R1=1.0))
        inner = lambda R: lam_unit / R ** p
    else:
        inner = lambda R: radial_first_eigenvalue(replace(base, kind="annulus", R0=R0, R1=R))
    outer = lambda R: radial_first_eigenvalue(replace(base, kind="annulus", R0=R, R1=R1))
    f = lambda R: inner(R) - outer(R)

    for frac in (0.05, 0.01):
        lo, hi = a + frac * (R1 - a), a + (1.0 - frac) * (R1 - a)
        f_lo, f_hi = f(lo), f(hi)
        if f_lo > 0.0 > f_hi:
            break
    else:
        raise OracleError(f"分裂半径无法括住: f({lo})={f_lo}, f({hi})={f_hi}")

    R = bracketed_root(f, lo, hi, xtol=tol * R1)
    split = NodalSplit(radius=R, lambda_inner=inner(R), lambda_outer=outer(R))
    logger.info(f"节点分裂半径: R1={R1}, R0={R0}, p={p}, N={dim} → R={R:.12g}, 失配={split.mismatch:.2e}")
    return split


def radial_nodal_split_radius(R1: float, p: float, dim: int = 2, R0: Optional[float] = None, **kwargs) -> float:
    return nodal_split(R1, p, dim, R0=R0, **kwargs).radius
