"""alpha- and lambda-mixtures, the mixture dual potential, reparameterization,
embedding into lambda-exponential families and the barycenter oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import stats as sps

from lambda_duality.divergences import (
    DensityFunction,
    DiscreteDensity,
    escort,
    log_divergence,
    renyi_divergence,
    renyi_entropy,
    shannon_entropy,
)
from lambda_duality.errors import DomainViolation, SupportConditionViolated
from lambda_duality.families import QGaussianFamily, SimplexFamily, StudentTFamily
from lambda_duality.mixtures import (
    EXAMPLE_MIXTURE_COMPONENTS,
    MixtureSpec,
    alpha_barycenter_check,
    alpha_mixture,
    embed_alpha_mixture,
    interpolation_path,
    lambda_mixture,
    mixture_dual_potential,
    mixture_grid,
    mixture_potential,
    mixture_primal_variable,
    mixture_reparameterization,
)
from lambda_duality.numerics import IntegrationScheme, fd_gradient, fd_hessian

EX = EXAMPLE_MIXTURE_COMPONENTS


def random_spec(seed, n=3, k=4):
    rng = np.random.default_rng(seed)
    return MixtureSpec.discrete(rng.dirichlet(np.ones(k), size=n))


def gaussian_spec():
    s = IntegrationScheme.gauss_legendre(-14, 14, 256)
    comps = [DensityFunction(lambda x, m=m: sps.norm.pdf(x, m, 1.0), s) for m in (-1.0, 0.5, 2.0)]
    return MixtureSpec(tuple(comps))


class TestAlphaMixture:
    def test_vertex(self):
        spec = MixtureSpec.discrete(EX)
        for i in range(3):
            w = np.eye(3)[i]
            np.testing.assert_allclose(alpha_mixture(0.3, spec, w).probs, EX[i], rtol=1e-13)

    def test_minus_one_is_linear(self):
        spec = MixtureSpec.discrete(EX)
        w = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(alpha_mixture(-1.0, spec, w).probs, w @ EX, rtol=1e-13)

    def test_two_point_symmetric(self):
        spec = MixtureSpec.discrete([[0.8, 0.2], [0.2, 0.8]])
        np.testing.assert_allclose(alpha_mixture(0.0, spec, [0.5, 0.5]).probs, [0.5, 0.5],
                                   rtol=1e-14)

    def test_geometric_limit(self):
        spec = MixtureSpec.discrete(EX)
        w = np.array([0.2, 0.5, 0.3])
        g = np.exp(w @ np.log(EX))
        np.testing.assert_allclose(alpha_mixture(1.0, spec, w).probs, g / g.sum(), rtol=1e-13)
        np.testing.assert_allclose(alpha_mixture(1.0 - 1e-7, spec, w).probs, g / g.sum(),
                                   rtol=1e-6)

    def test_continuous_linear(self):
        spec = gaussian_spec()
        w = np.array([0.3, 0.3, 0.4])
        p = alpha_mixture(-1.0, spec, w)
        x = np.array([-2.0, 0.0, 1.5])
        ref = sum(wi * sps.norm.pdf(x, m, 1.0) for wi, m in zip(w, (-1.0, 0.5, 2.0)))
        np.testing.assert_allclose(p(x), ref, rtol=1e-10)

    def test_bad_weights(self):
        with pytest.raises(DomainViolation):
            alpha_mixture(0.0, MixtureSpec.discrete(EX), [0.5, 0.6, -0.1])


class TestLambdaMixture:
    def test_vertices(self):
        spec = MixtureSpec.discrete(EX)
        np.testing.assert_allclose(lambda_mixture(-2.0, spec, [1.0, 0.0, 0.0]).probs, EX[0],
                                   rtol=1e-13)
        np.testing.assert_allclose(lambda_mixture(0.7, spec, [0.0, 0.0, 1.0]).probs, EX[2],
                                   rtol=1e-13)

    @pytest.mark.parametrize("lam", [-2.0, -0.5, 0.5, 0.9])
    def test_point_masses(self, lam):
        q = 1 - lam
        spec = MixtureSpec.discrete(np.eye(3))
        eta = np.array([0.2, 0.3, 0.5])
        ref = eta ** (1 / q)
        np.testing.assert_allclose(lambda_mixture(lam, spec, eta).probs, ref / ref.sum(),
                                   rtol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.sampled_from([-2.0, -0.7, 0.3, 0.8]))
    def test_escort_linearity(self, seed, lam):
        q = 1 - lam
        spec = random_spec(seed)
        eta = np.random.default_rng(seed + 1).dirichlet(np.ones(3))
        p = lambda_mixture(lam, spec, eta)
        comps = [escort(q, c).probs for c in spec.components]
        np.testing.assert_allclose(escort(q, p).probs, eta @ np.vstack(comps), atol=1e-12)

    def test_escort_linearity_continuous(self):
        lam, q = -0.5, 1.5
        spec = gaussian_spec()
        eta = np.array([0.2, 0.5, 0.3])
        p = lambda_mixture(lam, spec, eta)
        x = np.array([-1.0, 0.3, 2.2])
        lhs = escort(q, p)(x)
        rhs = sum(e * escort(q, c)(x) for e, c in zip(eta, spec.components))
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9)

    def test_barred_coordinates(self):
        spec = MixtureSpec.discrete(EX)
        a = lambda_mixture(-2.0, spec, [0.2, 0.5, 0.3]).probs
        b = lambda_mixture(-2.0, spec, [0.5, 0.3]).probs
        np.testing.assert_array_equal(a, b)

    def test_lambda_one_rejected(self):
        with pytest.raises(DomainViolation):
            lambda_mixture(1.0, MixtureSpec.discrete(EX))


class TestDualPotential:
    def test_point_masses_uniform(self):
        spec = MixtureSpec.discrete(np.eye(4))
        np.testing.assert_allclose(mixture_dual_potential(0.5, spec, np.full(4, 0.25)),
                                   -math.log(4), rtol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.sampled_from([-2.0, -0.4, 0.5]))
    def test_z_form_matches_entropy(self, seed, lam):
        spec = random_spec(seed)
        eta = np.random.default_rng(seed + 7).dirichlet(np.ones(3))
        z = mixture_dual_potential(lam, spec, eta)
        ent = -renyi_entropy(1 - lam, lambda_mixture(lam, spec, eta))
        np.testing.assert_allclose(z, ent, atol=1e-10)
        np.testing.assert_allclose(mixture_dual_potential(lam, spec, eta, form="entropy"), ent,
                                   atol=1e-12)

    def test_classical_limit(self):
        spec = MixtureSpec.discrete(EX)
        eta = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(mixture_dual_potential(0.0, spec, eta),
                                   -shannon_entropy(DiscreteDensity(eta @ EX)), rtol=1e-13)

    @pytest.mark.parametrize("lam", [-2.0, 0.5])
    def test_analytic_gradient_and_hessian(self, lam):
        psi = mixture_potential(lam, MixtureSpec.discrete(EX))
        e = np.array([0.3, 0.25])
        np.testing.assert_allclose(psi.gradient(e), fd_gradient(psi.value, e), atol=1e-7)
        np.testing.assert_allclose(psi.hessian(e), fd_hessian(psi.value, e), atol=1e-5)

    @pytest.mark.parametrize("lam", [-2.0, -0.5, 0.4, 0.8])
    def test_renyi_duality(self, lam):
        q = 1 - lam
        spec = random_spec(11)
        psi = mixture_potential(lam, spec)
        for e, ep in (([0.3, 0.2], [0.1, 0.6]), ([0.5, 0.4], [0.2, 0.2])):
            lhs = log_divergence(lam, psi, e, ep)
            rhs = renyi_divergence(q, lambda_mixture(lam, spec, e), lambda_mixture(lam, spec, ep))
            np.testing.assert_allclose(lhs, rhs, atol=1e-6)

    @pytest.mark.parametrize("lam", [-2.0, 0.5])
    def test_transformed_potential_convex(self, lam):
        psi = mixture_potential(lam, random_spec(3))
        g = lambda e: math.expm1(lam * psi.value(e)) / lam
        for e in ([0.2, 0.3], [0.6, 0.1], [0.1, 0.1]):
            H = fd_hessian(g, np.array(e))
            assert np.min(np.linalg.eigvalsh(0.5 * (H + H.T))) > -1e-6


class TestPrimalVariable:
    @pytest.mark.parametrize("lam", [-1.0, 0.5])
    def test_simplex_box_cox(self, lam):
        spec = MixtureSpec.discrete(np.eye(3))
        eta_bar = np.array([0.3, 0.5])
        u = lambda_mixture(lam, spec, eta_bar).probs
        expected = ((u[1:] / u[0]) ** lam - 1) / lam
        np.testing.assert_allclose(mixture_primal_variable(lam, spec, eta_bar), expected,
                                   rtol=1e-10, atol=1e-12)

    def test_symmetric_spec_uniform(self):
        P = np.array([[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])
        np.testing.assert_allclose(
            mixture_primal_variable(-0.5, MixtureSpec.discrete(P), [1 / 3, 1 / 3]), 0.0,
            atol=1e-13)

    @pytest.mark.parametrize("lam", [-2.0, 0.6])
    def test_is_lambda_gradient_of_psi(self, lam):
        spec = MixtureSpec.discrete(EX)
        psi = mixture_potential(lam, spec)
        e = np.array([0.25, 0.35])
        g = fd_gradient(psi.value, e)
        np.testing.assert_allclose(mixture_primal_variable(lam, spec, e),
                                   g / (1 - lam * g @ e), atol=1e-5)


class TestReparameterization:
    def test_equal_normalizers(self):
        P = np.array([[0.6, 0.3, 0.1], [0.1, 0.6, 0.3], [0.3, 0.1, 0.6]])
        rp = mixture_reparameterization(-0.5, MixtureSpec.discrete(P))
        eta = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(rp.w_from_eta(eta), eta, rtol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.sampled_from([-2.0, -0.3, 0.6]))
    def test_round_trip_and_density(self, seed, lam):
        spec = random_spec(seed)
        rp = mixture_reparameterization(lam, spec)
        eta = np.random.default_rng(seed + 3).dirichlet(np.ones(3))
        w = rp.w_from_eta(eta)
        np.testing.assert_allclose(rp.eta_from_w(w), eta, atol=1e-12)
        np.testing.assert_allclose(lambda_mixture(lam, spec, eta).probs,
                                   alpha_mixture(rp.alpha, spec, w).probs, atol=1e-10)


class TestEmbedding:
    def test_vertex(self):
        fam = StudentTFamily(3.0)
        V = [fam.vartheta_from_location_scale(-4.0, 0.49),
             fam.vartheta_from_location_scale(3.0, 1.0)]
        np.testing.assert_allclose(embed_alpha_mixture(fam, V, [0.0, 1.0]), V[1], rtol=1e-14)

    def test_student_t_matches_direct_alpha_mixture(self):
        fam = StudentTFamily(3.0)
        assert fam.lam.lam == pytest.approx(-0.5)
        V = [fam.vartheta_from_location_scale(-4.0, 0.49),
             fam.vartheta_from_location_scale(3.0, 1.0)]
        t = embed_alpha_mixture(fam, V, [0.5, 0.5])
        # alpha = 1 - 2 lambda = 2, exponent (1 - alpha)/2 = -1/2
        un = lambda x: (0.5 * sps.t.pdf(x, 3, -4.0, 0.7) ** -0.5
                        + 0.5 * sps.t.pdf(x, 3, 3.0, 1.0) ** -0.5) ** -2.0
        c, _ = sp_integrate.quad(un, -np.inf, np.inf, epsabs=1e-13, limit=400)
        x = np.linspace(-10, 10, 201)
        diff = np.max(np.abs(fam.density(t, x[:, None]) - un(x) / c))
        assert diff <= 1e-6

    def test_simplex_matches_alpha_mixture(self):
        lam = -0.6
        fam = SimplexFamily(lam, 2)
        U = np.array([[0.5, 0.2, 0.3], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]])
        V = [fam.vartheta_from_probs(u) for u in U]
        w = np.array([0.2, 0.5, 0.3])
        t = embed_alpha_mixture(fam, V, w)
        direct = alpha_mixture(1 - 2 * lam, MixtureSpec.discrete(U), w).probs
        np.testing.assert_allclose(fam.probs(t), direct, atol=1e-8)

    def test_equal_potentials_give_convex_combination(self):
        fam = SimplexFamily(0.5, 2)
        V = [fam.vartheta_from_probs([0.5, 0.2, 0.3]), fam.vartheta_from_probs([0.5, 0.4, 0.1])]
        w = np.array([0.3, 0.7])
        np.testing.assert_allclose(embed_alpha_mixture(fam, V, w), w @ np.vstack(V),
                                   rtol=1e-13)

    def test_support_condition_enforced(self):
        fam = QGaussianFamily(0.5)
        with pytest.raises(SupportConditionViolated):
            embed_alpha_mixture(fam, [[1.0], [2.0]], [0.5, 0.5])


class TestInterpolationPath:
    def test_student_t_path_is_straight(self):
        fam = StudentTFamily(3.0)
        V = [fam.vartheta_from_location_scale(-4.0, 0.49),
             fam.vartheta_from_location_scale(3.0, 1.0)]
        path = interpolation_path(fam, V, [1.0, 0.0], [0.0, 1.0], 21)
        assert path.residual <= 1e-9
        assert path.monotone
        np.testing.assert_allclose([path.s[0], path.s[-1]], [0.0, 1.0], atol=1e-14)

    def test_constant_path(self):
        fam = StudentTFamily(30.0)
        V = [fam.vartheta_from_location_scale(0.0, 1.0),
             fam.vartheta_from_location_scale(1.0, 2.0)]
        path = interpolation_path(fam, V, [0.4, 0.6], [0.4, 0.6], 5)
        assert path.residual == 0.0
        np.testing.assert_allclose(path.vartheta, np.tile(path.vartheta[0], (5, 1)))

    def test_equal_potentials_identity_time_change(self):
        fam = SimplexFamily(0.5, 2)
        V = [fam.vartheta_from_probs([0.5, 0.2, 0.3]), fam.vartheta_from_probs([0.5, 0.4, 0.1])]
        path = interpolation_path(fam, V, [1.0, 0.0], [0.0, 1.0], 11)
        np.testing.assert_allclose(path.s, path.t, atol=1e-14)


class TestBarycenter:
    def test_vertex(self):
        spec = MixtureSpec.discrete(EX)
        r = alpha_barycenter_check(0.5, spec, [0.0, 1.0, 0.0], resolution=0.01)
        assert np.max(np.abs(r.grid_argmin - EX[1])) <= r.resolution

    def test_symmetric(self):
        P = np.array([[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])
        r = alpha_barycenter_check(3.0, MixtureSpec.discrete(P), resolution=0.01)
        np.testing.assert_allclose(r.grid_argmin, [1 / 3, 1 / 3, 1 / 3], atol=0.01)

    def test_example_spec(self):
        lam = -2.0
        r = alpha_barycenter_check(1 - 2 * lam, MixtureSpec.discrete(EX), [0.2, 0.5, 0.3],
                                   resolution=0.005)
        assert r.discrepancy <= 2 * 0.005

    @pytest.mark.parametrize("alpha", [-1.0, 1.0])
    def test_kl_endpoints(self, alpha):
        r = alpha_barycenter_check(alpha, MixtureSpec.discrete(EX), [0.2, 0.5, 0.3],
                                   resolution=0.02)
        assert r.discrepancy <= 2 * 0.02


class TestMixtureGrid:
    @pytest.mark.parametrize("lam", [-2.0, 0.7])
    def test_permutation_consistent(self, lam):
        perm = [2, 0, 1]
        etas, dens = mixture_grid(lam, MixtureSpec.discrete(EX), 10)
        etas2, dens2 = mixture_grid(lam, MixtureSpec.discrete(EX[:, perm]), 10)
        np.testing.assert_array_equal(etas, etas2)
        np.testing.assert_allclose(dens2, dens[:, perm], rtol=1e-13)

    def test_grid_agrees_with_lambda_mixture(self):
        spec = MixtureSpec.discrete(EX)
        etas, dens = mixture_grid(0.7, spec, 4)
        for e, d in zip(etas, dens):
            np.testing.assert_allclose(d, lambda_mixture(0.7, spec, e).probs, rtol=1e-12)
