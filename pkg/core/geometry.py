"""
偏心圆环的精确几何量 (Geometry)
包含判定、内切半径、Λ∞、周长/体积比与仿射镜像。所有量均为闭式公式，不做数值求积。
纯函数，可无限制并发调用。
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from core.exceptions import GeometryError
from core.schemas import AnnulusSpec

CONTAINED = "contained"
INTERMEDIATE = "intermediate"
OVERLAPPING = "overlapping"
EXTERIOR = "exterior"


def _as_point(point: Sequence[float], dim: int) -> np.ndarray:
    x = np.asarray(point, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise GeometryError(f"坐标维数 {x.shape} 与空间维数 {dim} 不一致")
    return x


def _shift(dim: int, s: float) -> np.ndarray:
    e1 = np.zeros(dim)
    e1[0] = s
    return e1


def contains(spec: AnnulusSpec, point: Sequence[float]) -> bool:
    """|x| < R1 且 |x − s·e1| > R0 时返回 True"""
    x = _as_point(point, spec.dim)
    return bool(np.linalg.norm(x) < spec.R1 and np.linalg.norm(x - _shift(spec.dim, spec.s)) > spec.R0)


def regime(spec: AnnulusSpec) -> str:
    """
    偏心距所处的区段：
    contained (s < R1−R0)、intermediate (单调性未知的区段)、
    overlapping (内球穿出外球)、exterior (s ≥ R1+R0)。
    """
    if spec.s < spec.R1 - spec.R0:
        return CONTAINED
    if spec.s < math.sqrt(spec.R1 ** 2 - spec.R0 ** 2):
        return INTERMEDIATE
    if spec.s < spec.R1 + spec.R0:
        return OVERLAPPING
    return EXTERIOR


def inradius(spec: AnnulusSpec) -> float:
    """最大内切球半径：s < R1+R0 时为 (R1−R0+s)/2，否则为 R1"""
    if spec.s >= spec.R1 + spec.R0:
        return spec.R1
    return 0.5 * (spec.R1 - spec.R0 + spec.s)


def lambda_infinity(spec: AnnulusSpec) -> float:
    """Λ∞(s) = 1 / r_max，在 [0, R1+R0) 上严格递减"""
    return 1.0 / inradius(spec)


def sphere_area(dim: int, r: float) -> float:
    """半径 r 的 (dim−1) 维球面面积 N·ω_N·r^{N−1}"""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0) * r ** (dim - 1)


def ball_volume(dim: int, r: float) -> float:
    """半径 r 的 dim 维球体积"""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0) * r ** dim


def perimeter_volume_ratio(spec: AnnulusSpec) -> float:
    """
    |∂Ω_s| / |Ω_s|。边界球面不相交时与 s 无关，
    二维时等于 2(R1+R0)/(R1²−R0²)。
    """
    if spec.s >= spec.R1 - spec.R0:
        raise GeometryError(f"周长/体积比只在 s < R1−R0 时有定义，实际 s={spec.s}")
    # 比值 N(R1^{N−1}+R0^{N−1})/(R1^N−R0^N)，公共因子 ω_N 约去
    n = spec.dim
    return n * (spec.R1 ** (n - 1) + spec.R0 ** (n - 1)) / (spec.R1 ** n - spec.R0 ** n)


def cheeger_upper_bound(spec: AnnulusSpec) -> float:
    """同心圆环可校准，h(0) 即其周长/体积比，也是所有包含情形 h(s) 的上界"""
    return perimeter_volume_ratio(spec.with_offset(0.0))


def reflect(point: Sequence[float], axis_normal: Sequence[float], offset: float = 0.0) -> np.ndarray:
    """
    关于仿射超平面 {x : ⟨a, x − offset·e1⟩ = 0} 的镜像。
    对合映射 (作用两次为恒等)，且为等距变换。
    """
    a = np.asarray(axis_normal, dtype=float)
    x = _as_point(point, a.shape[0])
    norm2 = float(a @ a)
    if norm2 == 0.0:
        raise GeometryError("镜像法向不能为零向量")
    c = _shift(a.shape[0], offset)
    return x - 2.0 * float(a @ (x - c)) / norm2 * a
