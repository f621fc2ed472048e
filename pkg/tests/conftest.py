"""测试公共设施：仓库根目录入 sys.path，以及会话级缓存的特征对求解。"""
import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import pytest

from core.schemas import AnnulusSpec, SolverConfig
from infra.mesh.annulus import generate_annulus_mesh
from services.eigen_service import EigenService

COARSE = (8, 32)
MEDIUM = (16, 64)
DEFAULT = (32, 128)


@pytest.fixture(scope="session")
def solve():
    """
    solve(R1, R0, s, p, res) → EigenResult，同一组参数在整个会话中只求解一次。
    求解是确定性的，缓存不改变任何断言。
    """
    cache = {}

    def _solve(R1, R0, s, p, res=MEDIUM, **overrides):
        key = (R1, R0, s, p, tuple(res), tuple(sorted(overrides.items())))
        if key not in cache:
            mesh = generate_annulus_mesh(AnnulusSpec(R1, R0, s), *res)
            cache[key] = EigenService.solve_first_eigenpair(mesh, SolverConfig(p=p, **overrides))
        return cache[key]

    return _solve
