"""
网格拓扑 (Mesh Topology)
基于 NetworkX 的边界环校验、欧拉示性数与边-三角形邻接关系。
"""
import logging
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from core.exceptions import MeshError
from core.schemas import Mesh, TAG_NAMES

logger = logging.getLogger(__name__)


def boundary_graph(mesh: Mesh, tag: int) -> nx.Graph:
    """某一标签的边界边构成的图"""
    G = nx.Graph()
    edges = mesh.boundary_edges[mesh.boundary_tags == tag]
    G.add_edges_from((int(u), int(v)) for u, v in edges)
    return G


def boundary_loops(mesh: Mesh) -> Dict[int, List[int]]:
    """
    返回每个标签对应的有序顶点环。
    每个标签必须恰好构成一个简单闭合环 (连通且所有顶点度为 2)，否则抛出 MeshError。
    """
    loops = {}
    for tag, name in TAG_NAMES.items():
        G = boundary_graph(mesh, tag)
        if G.number_of_nodes() < 3:
            raise MeshError(f"{name} 边界环顶点过少: {G.number_of_nodes()}")
        if not nx.is_connected(G):
            raise MeshError(f"{name} 边界由 {nx.number_connected_components(G)} 个分支组成，应为 1 个闭合环")
        degrees = {d for _, d in G.degree()}
        if degrees != {2}:
            raise MeshError(f"{name} 边界不是简单闭合环: 顶点度数集合 {sorted(degrees)}")
        cycle = nx.find_cycle(G)
        loops[tag] = [u for u, _ in cycle]

    shared = set(loops[0]) & set(loops[1])
    if shared:
        raise MeshError(f"内外边界环共享 {len(shared)} 个顶点")
    return loops


def unique_edges(triangles: np.ndarray) -> np.ndarray:
    """三角形集合中的全部无向边 (按顶点编号排序、去重)"""
    edges = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.unique(np.sort(edges, axis=1), axis=0)


def euler_characteristic(mesh: Mesh) -> int:
    """V − E + F；圆环为 0"""
    return mesh.n_vertices - unique_edges(mesh.triangles).shape[0] + mesh.n_triangles


def edge_triangle_map(mesh: Mesh) -> Dict[Tuple[int, int], List[int]]:
    """无向边 → 包含它的三角形编号列表"""
    adjacency: Dict[Tuple[int, int], List[int]] = {}
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            u, v = int(tri[k]), int(tri[(k + 1) % 3])
            adjacency.setdefault((min(u, v), max(u, v)), []).append(t)
    return adjacency
