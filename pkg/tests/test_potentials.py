"""Built-in potentials: analytic derivatives, domains and closed-form conjugates."""

import math

import numpy as np
import pytest

from lambda_duality.lambda_core import (
    check_regularity,
    conjugate,
    lambda_gradient,
)
from lambda_duality.numerics import fd_gradient, fd_hessian
from lambda_duality.potentials import (
    BUILTIN,
    builtin_potential,
    cauchy_potential,
    dirichlet_dual_potential,
    dirichlet_potential,
    log_quadratic_potential,
    qgaussian_product_potential,
    renyi_simplex_potential,
    simplex_potential,
)

# (name, lambda, dim, interior point)
CASES = [
    ("quadratic", 0.0, 2, [0.3, -0.4]),
    ("quadratic", 0.5, 2, [0.3, -0.4]),
    ("q-gaussian", -1.0, 1, [1.7]),
    ("q-gaussian-product", 0.5, 2, [0.8, 2.5]),
    ("cauchy", -1.0, 2, [0.4, -1.3]),
    ("cauchy", 0.5, 2, [0.4, -1.3]),
    ("simplex", -0.5, 2, [0.3, -0.9]),
    ("simplex", 0.9, 3, [0.3, -0.9, 0.1]),
    ("simplex", 0.0, 2, [0.3, -0.9]),
    ("renyi-simplex", 0.7, 2, [0.2, 0.5]),
    ("renyi-simplex", -2.0, 2, [0.2, 0.5]),
    ("renyi-simplex", 0.0, 2, [0.2, 0.5]),
    ("envelope-example", 0.5, 1, [2.3]),
    ("log-quadratic", -1.0, 1, [0.6]),
    ("dirichlet", -0.3, 2, [-2.0, -0.7]),
    ("dirichlet-dual", -0.3, 2, [1.5, 0.2]),
]


class TestAnalyticDerivatives:
    @pytest.mark.parametrize("name,lam,dim,u", CASES)
    def test_gradient_and_hessian_match_fd(self, name, lam, dim, u):
        f = builtin_potential(name, lam, dim)
        u = np.array(u, float)
        assert f.domain.contains(u)
        np.testing.assert_allclose(f.gradient(u), fd_gradient(f.value, u), atol=1e-7)
        np.testing.assert_allclose(f.hessian(u), fd_hessian(f.value, u), atol=2e-5, rtol=1e-5)

    def test_builtin_registry(self):
        assert set(BUILTIN) >= {"quadratic", "q-gaussian", "cauchy", "simplex"}
        with pytest.raises(KeyError):
            builtin_potential("no-such-potential", 0.5)


class TestSimplexPotential:
    def test_uniform_is_log_three(self):
        for lam in (-1.0, 0.0, 0.5):
            np.testing.assert_allclose(simplex_potential(lam, 2).value([0, 0]), math.log(3),
                                       rtol=1e-15)

    def test_minus_log_u0(self):
        lam = 0.5
        u = np.array([0.2, 0.5, 0.3])
        t = (np.power(u[1:] / u[0], lam) - 1) / lam
        np.testing.assert_allclose(simplex_potential(lam, 2).value(t), -math.log(u[0]),
                                   rtol=1e-14)

    @pytest.mark.parametrize("lam", [-1.0, -0.5, 0.5, 0.9])
    def test_regular(self, lam):
        f = simplex_potential(lam, 2)
        rng = np.random.default_rng(1)
        u = rng.dirichlet(np.ones(3), size=30)
        grid = (np.power(u[:, 1:] / u[:, :1], lam) - 1) / lam
        assert check_regularity(lam, f, grid).ok

    @pytest.mark.parametrize("lam", [-0.5, 0.7])
    def test_renyi_form_is_the_conjugate(self, lam):
        f = simplex_potential(lam, 2)
        psi = renyi_simplex_potential(lam, 2)
        for eta in ([0.2, 0.3], [0.6, 0.1]):
            np.testing.assert_allclose(conjugate(lam, f, eta).value, psi.value(eta), atol=1e-8)


class TestDirichletPotential:
    @pytest.mark.parametrize("sigma", [0.3, 1.0])
    def test_closed_form_conjugate(self, sigma):
        lam = -sigma
        f = dirichlet_potential(lam, 2)
        psi = dirichlet_dual_potential(lam, 2)
        for eta in ([0.7, 1.9], [3.0, 0.4]):
            np.testing.assert_allclose(conjugate(lam, f, eta).value, psi.value(eta), atol=1e-8)

    def test_dual_parameter(self):
        # eta_i = 1/(lambda vartheta_i)
        lam = -0.4
        t = np.array([-2.0, -0.5])
        np.testing.assert_allclose(lambda_gradient(lam, dirichlet_potential(lam, 2), t),
                                   1.0 / (lam * t), rtol=1e-13)


class TestOtherPotentials:
    def test_cauchy_dual_parameter(self):
        # eta = (-t1/(2 t2), -1/t2) at lambda = -1
        f = cauchy_potential(-1.0)
        t = np.array([0.6, -0.9])
        np.testing.assert_allclose(lambda_gradient(-1.0, f, t),
                                   [-t[0] / (2 * t[1]), -1.0 / t[1]], rtol=1e-13)

    def test_cauchy_positive_lambda_domain_is_regular(self):
        lam = 0.5
        f = cauchy_potential(lam)
        pts = [p for p in np.random.default_rng(0).uniform(-3, 0, (200, 2)) if f.domain.contains(p)]
        assert len(pts) > 20
        assert check_regularity(lam, f, np.array(pts)).ok

    def test_log_quadratic_transform_is_quadratic(self):
        lam = -0.8
        f = log_quadratic_potential(lam)
        for u in (-0.9, 0.2, 1.3):
            np.testing.assert_allclose(math.expm1(lam * f.value([u])) / lam, 0.5 * u * u,
                                       rtol=1e-13)

    def test_qgaussian_product_lambda_gradient(self):
        lam = 0.4
        t = np.array([0.5, 2.0])
        v = lambda_gradient(lam, qgaussian_product_potential(2), t)
        # grad = -1/(2t), grad.t = -1, s = 1 + lambda
        np.testing.assert_allclose(v, -0.5 / t / (1 + lam), rtol=1e-14)
