"""p-Laplace 第一特征对求解器测试。"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from conftest import COARSE, MEDIUM, DEFAULT
from core.exceptions import ConfigurationError, NonConvergedError, SolverError
from core.schemas import AnnulusSpec, RadialProblem, ScalarField, SolverConfig
from infra.fem.p1 import get_operators
from infra.mesh.annulus import generate_annulus_mesh, mirror_index
from infra.radial.shooting import radial_first_eigenvalue
from services.eigen_service import EigenService, solve_many


# ============================================================
# 1. Rayleigh 商
# ============================================================
class TestRayleighQuotient:
    """离散 Rayleigh 商的定义与错误路径."""

    @pytest.fixture
    def mesh(self):
        return generate_annulus_mesh(AnnulusSpec(1.0, 0.5, 0.0), *COARSE)

    def test_scale_invariant(self, mesh):
        """RQ(c·u) = RQ(u)."""
        u = np.hypot(*mesh.vertices.T) - 0.5
        u[mesh.boundary_mask()] = 0.0
        for p in (1.5, 2.0, 3.0):
            q1 = EigenService.rayleigh_quotient(mesh, ScalarField(u, mesh), p)
            q2 = EigenService.rayleigh_quotient(mesh, ScalarField(7.0 * u, mesh), p)
            np.testing.assert_allclose(q2, q1, rtol=1e-12)
            assert q1 > 0.0

    def test_linear_field_gradient(self, mesh):
        """u = x 时每个三角形上梯度精确为 (1, 0)."""
        g = get_operators(mesh).gradients(mesh.vertices[:, 0])
        np.testing.assert_allclose(g, np.tile([1.0, 0.0], (mesh.n_triangles, 1)), atol=1e-12)

    def test_zero_field(self, mesh):
        with pytest.raises(SolverError):
            EigenService.rayleigh_quotient(mesh, ScalarField(np.zeros(mesh.n_vertices), mesh), 2.0)

    def test_field_from_other_mesh(self, mesh):
        other = generate_annulus_mesh(AnnulusSpec(1.0, 0.5, 0.0), 4, 16)
        field = ScalarField(np.ones(other.n_vertices), other)
        with pytest.raises(SolverError):
            EigenService.rayleigh_quotient(mesh, field, 2.0)


# ============================================================
# 2. SolverConfig
# ============================================================
class TestSolverConfig:
    """参数校验与配置段合并."""

    @pytest.mark.parametrize("kwargs", [
        {"p": 1.0}, {"tol": 0.0}, {"step_shrink": 1.0}, {"max_iter": 0}, {"epsilon": -1.0}, {"initial": "random"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            SolverConfig(**kwargs)

    def test_from_config_overrides(self):
        cfg = SolverConfig.from_config({"tol": 1e-8, "max_iter": 10, "unknown": 1}, max_iter=20, p=3.0, epsilon=None)
        assert cfg.tol == 1e-8 and cfg.max_iter == 20 and cfg.p == 3.0 and cfg.epsilon is None

    def test_regularization_scales_with_radius(self):
        assert SolverConfig().regularization(2.0) == 0.5e-8
        assert SolverConfig(epsilon=1e-3).regularization(2.0) == 1e-3

    def test_numeric_strings_coerced(self):
        """配置文件读入的字符串数值转成 float / int."""
        cfg = SolverConfig(tol="1.0e-10", max_iter="500", metric_refresh="3")
        assert cfg.tol == 1e-10 and isinstance(cfg.tol, float)
        assert cfg.max_iter == 500 and isinstance(cfg.max_iter, int)
        assert cfg.metric_refresh == 3

    def test_non_numeric_string(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(tol="tight")


# ============================================================
# 3. 收敛的特征对
# ============================================================
class TestEigenpair:
    """求解结果的后置条件."""

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_postconditions(self, solve, p):
        """收敛、边界为零、内部为正、‖u‖_p = 1、Rayleigh 商等于 λ."""
        result = solve(1.0, 0.3, 0.2, p, COARSE)
        mesh = result.mesh
        u = result.field.values
        assert result.converged
        assert result.field.satisfies_dirichlet()
        assert np.all(u[mesh.interior_indices()] > 0.0)
        np.testing.assert_allclose(get_operators(mesh).mass @ np.abs(u) ** p, 1.0, rtol=1e-12)
        np.testing.assert_allclose(EigenService.rayleigh_quotient(mesh, result.field, p), result.lam, rtol=1e-12)

    def test_history_monotone(self, solve):
        history = solve(1.0, 0.3, 0.2, 3.0, COARSE).history
        assert all(b < a for a, b in zip(history, history[1:]))

    def test_oracle_agreement_coarse(self, solve):
        """同心圆环 (1, 0.5, 0), p=2, (16,64)：与径向打靶相差不超过 5%."""
        oracle = radial_first_eigenvalue(RadialProblem.annulus(0.5, 1.0, 2.0))
        lam = solve(1.0, 0.5, 0.0, 2.0, MEDIUM).lam
        assert abs(lam - oracle) / oracle < 0.05

    @pytest.mark.parametrize("p", [2.0, 3.0, 5.0])
    def test_mirror_symmetry(self, solve, p):
        """镜像顶点上的取值一致到 1e−6 (相对)."""
        result = solve(1.0, 0.3, 0.3, p, COARSE)
        u = result.field.values
        m = mirror_index(result.mesh)
        assert np.max(np.abs(u - u[m])) / np.max(np.abs(u)) <= 1e-6

    @pytest.mark.slow
    def test_mirror_symmetry_high_exponent(self, solve):
        """p=5, 默认分辨率、小偏心距下度量更新不破坏镜像对称."""
        result = solve(1.0, 0.3, 0.1, 5.0, DEFAULT)
        u = result.field.values
        m = mirror_index(result.mesh)
        assert result.converged
        assert np.max(np.abs(u - u[m])) / np.max(np.abs(u)) <= 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_mesh_convergence(self, solve, p):
        """相邻分辨率之间 λ 的差随加密缩小."""
        lams = [solve(1.0, 0.3, 0.2, p, res).lam for res in (COARSE, MEDIUM, DEFAULT)]
        assert abs(lams[1] - lams[2]) < abs(lams[0] - lams[1])

    def test_deterministic(self):
        mesh = generate_annulus_mesh(AnnulusSpec(1.0, 0.3, 0.1), *COARSE)
        a = EigenService.solve_first_eigenpair(mesh, SolverConfig(p=2.5))
        b = EigenService.solve_first_eigenpair(mesh, SolverConfig(p=2.5))
        assert a.lam == b.lam and a.iterations == b.iterations
        np.testing.assert_array_equal(a.field.values, b.field.values)

    def test_initial_guess_independent(self, solve):
        """tent 与 ones 两种初值收敛到同一个 λ."""
        tent = solve(1.0, 0.3, 0.1, 2.0, COARSE)
        ones = solve(1.0, 0.3, 0.1, 2.0, COARSE, initial="ones")
        np.testing.assert_allclose(ones.lam, tent.lam, rtol=1e-7)


# ============================================================
# 4. 未收敛与批量求解
# ============================================================
class TestNonConvergence:
    """达到 max_iter 时返回部分结果而不抛异常."""

    def test_partial_result(self):
        mesh = generate_annulus_mesh(AnnulusSpec(1.0, 0.3, 0.0), *COARSE)
        result = EigenService.solve_first_eigenpair(mesh, SolverConfig(p=3.0, max_iter=1))
        assert not result.converged
        assert result.iterations == 1
        assert np.isfinite(result.lam)
        with pytest.raises(NonConvergedError) as info:
            result.raise_if_not_converged()
        assert info.value.result is result


class TestSolveMany:
    """批量求解按输入顺序返回，与逐个求解一致."""

    def test_order_and_values(self):
        spec = AnnulusSpec(1.0, 0.3)
        config = SolverConfig(p=2.0)
        batch = solve_many([(spec, 0.2), (spec, 0.0)], (4, 16), config)
        single = EigenService.solve_first_eigenpair(generate_annulus_mesh(spec.with_offset(0.2), 4, 16), config)
        assert batch[0].mesh.spec.s == 0.2 and batch[1].mesh.spec.s == 0.0
        assert batch[0].lam == single.lam

    def test_process_pool_matches_serial(self):
        spec = AnnulusSpec(1.0, 0.3)
        config = dataclasses.replace(SolverConfig(), p=2.0)
        tasks = [(spec, 0.0), (spec, 0.2)]
        serial = solve_many(tasks, (4, 16), config, workers=1)
        pooled = solve_many(tasks, (4, 16), config, workers=2)
        assert [r.lam for r in pooled] == [r.lam for r in serial]
