"""
偏心圆环结构化网格 (Annulus Mesh)
线性径向插值 (transfinite blend) 生成三角网格，内外边界环带标签，支持一致加密。
"""
from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from config.loader import get_section
from core.exceptions import MeshError
from core.schemas import AnnulusSpec, Mesh, INNER, OUTER, TAG_NAMES
from infra.mesh import topology

logger = logging.getLogger(__name__)

# 相对 R1 的内切安全距离，避免近切时出现细长三角形
TANGENCY_MARGIN = 1.0e-6


def tangency_margin() -> float:
    """mesh.tangency_margin 配置值 (缺省 TANGENCY_MARGIN)"""
    return float(get_section("mesh").get("tangency_margin", TANGENCY_MARGIN))


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """逐三角形有向面积 (逆时针为正)"""
    p0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]] - p0
    v2 = vertices[triangles[:, 2]] - p0
    return 0.5 * (v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0])


def _unit_circle(n_angular: int) -> np.ndarray:
    """
    角向单位向量。下半圆直接取上半圆的镜像，
    保证顶点集在 θ ↔ −θ 下精确 (逐位) 对称。
    """
    half = n_angular // 2
    theta = 2.0 * math.pi * np.arange(half + 1) / n_angular
    upper = np.column_stack([np.cos(theta), np.sin(theta)])
    upper[0] = (1.0, 0.0)
    upper[half] = (-1.0, 0.0)
    lower = upper[1:half][::-1] * np.array([1.0, -1.0])
    return np.vstack([upper, lower])


def _check_counts(n_radial: int, n_angular: int):
    if int(n_radial) != n_radial or n_radial < 2:
        raise MeshError(f"n_radial 必须是 ≥ 2 的整数，实际 {n_radial}")
    if int(n_angular) != n_angular or n_angular < 8 or n_angular % 2:
        raise MeshError(f"n_angular 必须是 ≥ 8 的偶数，实际 {n_angular}")


def generate_annulus_mesh(spec: AnnulusSpec, n_radial: int, n_angular: int,
                          margin: Optional[float] = None) -> Mesh:
    """
    生成 Ω_s 的结构化三角网格。

    顶点 v_ij = (1−t_i)·(s·e1 + R0·ω_j) + t_i·R1·ω_j，t_i = i/n_radial，ω_j 为角向单位向量。
    上半圆 (j < n_angular/2) 的四边形沿 (i,j)–(i+1,j+1) 对角线剖分，下半圆取其镜像对角线
    (i,j+1)–(i+1,j)，使整个三角剖分关于第一坐标轴对称。i=0 环标记为 inner，i=n_radial 环标记为 outer。

    Raises:
        MeshError: 维数不是 2、计数非法或偏心距超出包含区间。
    """
    if spec.dim != 2:
        raise MeshError(f"网格生成只支持二维，实际 dim={spec.dim}")
    _check_counts(n_radial, n_angular)
    margin = tangency_margin() if margin is None else margin
    if not spec.is_contained(margin):
        raise MeshError(
            f"偏心距 s={spec.s} 超出包含区间 [0, R1−R0−{margin}·R1] (R1={spec.R1}, R0={spec.R0})"
        )

    nr, na = int(n_radial), int(n_angular)
    omega = _unit_circle(na)
    inner = np.array([spec.s, 0.0]) + spec.R0 * omega
    outer = spec.R1 * omega
    t = (np.arange(nr + 1) / nr)[:, None, None]
    vertices = ((1.0 - t) * inner[None] + t * outer[None]).reshape(-1, 2)
    vertices[:na] = inner
    vertices[nr * na:] = outer

    i, j = np.meshgrid(np.arange(nr), np.arange(na), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jp = (j + 1) % na
    a = i * na + j
    b = (i + 1) * na + j
    c = (i + 1) * na + jp
    d = i * na + jp
    upper = (j < na // 2)[:, None]
    first = np.where(upper, np.column_stack([a, b, c]), np.column_stack([a, b, d]))
    second = np.where(upper, np.column_stack([a, c, d]), np.column_stack([d, b, c]))
    triangles = np.stack([first, second], axis=1).reshape(-1, 3)

    ring = np.arange(na)
    inner_edges = np.column_stack([ring, (ring + 1) % na])
    outer_edges = inner_edges + nr * na
    boundary_edges = np.vstack([inner_edges, outer_edges])
    boundary_tags = np.concatenate([np.full(na, INNER), np.full(na, OUTER)])

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles.astype(np.int64),
        boundary_edges=boundary_edges.astype(np.int64),
        boundary_tags=boundary_tags.astype(np.int64),
        n_radial=nr,
        n_angular=na,
        spec=spec,
    )
    validate_mesh(mesh)
    logger.debug(f"网格已生成: s={spec.s}, ({nr},{na}), V={mesh.n_vertices}, T={mesh.n_triangles}")
    return mesh


def validate_mesh(mesh: Mesh):
    """检查三角形方向、边界顶点位置与拓扑 (两条闭合边界环、欧拉示性数为 0)"""
    areas = signed_areas(mesh.vertices, mesh.triangles)
    if not np.all(areas > 0.0):
        raise MeshError(f"存在退化或反向三角形: 最小有向面积 {areas.min():.3e}")

    spec = mesh.spec
    center = np.array([spec.s, 0.0])
    tol = 1.0e-12 * spec.R1
    for tag, radius, origin in ((INNER, spec.R0, center), (OUTER, spec.R1, np.zeros(2))):
        idx = np.unique(mesh.boundary_edges[mesh.boundary_tags == tag])
        dist = np.linalg.norm(mesh.vertices[idx] - origin, axis=1)
        if np.max(np.abs(dist - radius)) > tol:
            raise MeshError(f"{TAG_NAMES[tag]} 环上的顶点偏离圆周超过 {tol:.1e}")

    topology.boundary_loops(mesh)
    chi = topology.euler_characteristic(mesh)
    if chi != 0:
        raise MeshError(f"欧拉示性数应为 0 (圆环)，实际为 {chi}")


def refine(mesh: Mesh) -> Mesh:
    """以 (2·n_radial, 2·n_angular) 重新生成，保持全部网格不变量"""
    return generate_annulus_mesh(mesh.spec, 2 * mesh.n_radial, 2 * mesh.n_angular)


def mirror_index(mesh: Mesh) -> np.ndarray:
    """顶点 (i, j) 与其关于第一坐标轴的镜像 (i, −j) 的配对置换"""
    na = mesh.n_angular
    i, j = np.divmod(np.arange(mesh.n_vertices), na)
    return i * na + (na - j) % na


def mesh_summary(mesh: Mesh) -> dict:
    """网格统计信息，供 mesh-info 子命令输出"""
    areas = signed_areas(mesh.vertices, mesh.triangles)
    spec = mesh.spec
    return {
        "n_radial": mesh.n_radial,
        "n_angular": mesh.n_angular,
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "inner_edges": int(np.count_nonzero(mesh.boundary_tags == INNER)),
        "outer_edges": int(np.count_nonzero(mesh.boundary_tags == OUTER)),
        "area": float(areas.sum()),
        "area_exact": math.pi * (spec.R1 ** 2 - spec.R0 ** 2),
        "min_triangle_area": float(areas.min()),
        "euler_characteristic": topology.euler_characteristic(mesh),
    }
