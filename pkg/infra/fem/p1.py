"""
分片线性有限元算子 (P1 Operators)
逐三角形常梯度矩阵、顶点集中质量与加权刚度矩阵的组装。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from core.schemas import Mesh
from infra.mesh.annulus import signed_areas

logger = logging.getLogger(__name__)


def grad_lambda(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """
    每个三角形上重心坐标函数的梯度，形状 (T, 3, 2)。
    第 k 个梯度垂直于对边、指向顶点 k，模长为 1/高。
    """
    node = vertices
    v0 = node[triangles[:, 2]] - node[triangles[:, 1]]
    v1 = node[triangles[:, 0]] - node[triangles[:, 2]]
    v2 = node[triangles[:, 1]] - node[triangles[:, 0]]
    length = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    W = np.array([[0.0, 1.0], [-1.0, 0.0]])
    Dlambda = np.empty((triangles.shape[0], 3, 2))
    Dlambda[:, 0] = v0 @ W / length[:, None]
    Dlambda[:, 1] = v1 @ W / length[:, None]
    Dlambda[:, 2] = v2 @ W / length[:, None]
    return Dlambda


@dataclass(frozen=True, eq=False)
class P1Operators:
    """
    一张网格上的 P1 离散算子。
    Gx、Gy 为 (T, V) 稀疏矩阵，(Gx u)_T、(Gy u)_T 给出三角形 T 上的常梯度；
    mass 为顶点平均 (三角形角点) 求积对应的集中质量 Σ_{T∋v} |T|/3。
    """
    areas: np.ndarray
    Gx: sp.csr_matrix
    Gy: sp.csr_matrix
    mass: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray

    def gradients(self, u: np.ndarray) -> np.ndarray:
        return np.column_stack([self.Gx @ u, self.Gy @ u])

    def stiffness(self, weights: np.ndarray) -> sp.csr_matrix:
        """加权刚度矩阵 Σ_T |T|·w_T·∇φ_i·∇φ_j"""
        D = sp.diags(self.areas * weights)
        return (self.Gx.T @ D @ self.Gx + self.Gy.T @ D @ self.Gy).tocsr()

    def divergence(self, flux: np.ndarray) -> np.ndarray:
        """Σ_T |T|·flux_T·∇φ_v，即 G^T (|T|·flux)"""
        return self.Gx.T @ (self.areas * flux[:, 0]) + self.Gy.T @ (self.areas * flux[:, 1])


def assemble(mesh: Mesh) -> P1Operators:
    """组装梯度算子与集中质量"""
    tri = mesh.triangles
    n_tri, n_vert = mesh.n_triangles, mesh.n_vertices
    areas = signed_areas(mesh.vertices, tri)
    Dlambda = grad_lambda(mesh.vertices, tri)

    rows = np.repeat(np.arange(n_tri), 3)
    cols = tri.ravel()
    Gx = sp.csr_matrix((Dlambda[:, :, 0].ravel(), (rows, cols)), shape=(n_tri, n_vert))
    Gy = sp.csr_matrix((Dlambda[:, :, 1].ravel(), (rows, cols)), shape=(n_tri, n_vert))

    mass = np.bincount(cols, weights=np.repeat(areas / 3.0, 3), minlength=n_vert)
    boundary = mesh.boundary_mask()
    return P1Operators(
        areas=areas,
        Gx=Gx,
        Gy=Gy,
        mass=mass,
        interior=np.flatnonzero(~boundary),
        boundary=boundary,
    )


@lru_cache(maxsize=8)
def get_operators(mesh: Mesh) -> P1Operators:
    """
    获取网格的离散算子 (带缓存)。
    Mesh 不可变且按对象身份哈希，同一网格重复求解时复用组装结果。
    """
    logger.debug(f"组装 P1 算子: V={mesh.n_vertices}, T={mesh.n_triangles}")
    return assemble(mesh)
