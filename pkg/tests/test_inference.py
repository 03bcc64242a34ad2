"""Likelihood as a divergence, MLE as a right barycenter, the dual variable
as a barycenter, Renyi maximum entropy and CSV ingestion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambda_duality.divergences import DiscreteDensity, kl_divergence
from lambda_duality.errors import (
    ConstraintViolated,
    DataFormatError,
    DomainViolation,
    SupportConditionViolated,
)
from lambda_duality.families import (
    DirichletPerturbationFamily,
    FiniteFamily,
    QGaussianFamily,
    SimplexFamily,
)
from lambda_duality.inference import (
    as_data_family,
    dirichlet_cost_form_check,
    dirichlet_standard_error,
    dual_barycenter_check,
    escort_mean,
    expected_divergence,
    gaussian_location_data_family,
    generate_competitors,
    likelihood_divergence_repr_check,
    load_data_csv,
    maxent_check,
    mle_barycenter,
    simplex_states_to_data,
)


class TestLikelihoodRepresentation:
    @pytest.mark.parametrize("lam", [-2.0, -0.5, 0.5, 0.9])
    def test_simplex_states_and_eta(self, lam):
        fam = SimplexFamily(lam, 2)
        t = fam.vartheta_from_probs([0.5, 0.2, 0.3])
        eta = as_data_family(fam).dual_parameter(t)
        states = simplex_states_to_data(np.arange(3), 2)
        assert likelihood_divergence_repr_check(fam, t, states) <= 1e-10
        # at y = eta the divergence vanishes and log p(eta) = psi(eta)
        assert likelihood_divergence_repr_check(fam, t, [eta]) <= 1e-10

    def test_simplex_log_density_matches_probs(self):
        fam = SimplexFamily(-0.5, 2)
        t = fam.vartheta_from_probs([0.5, 0.2, 0.3])
        Y = simplex_states_to_data(np.arange(3), 2)
        np.testing.assert_allclose(np.exp(as_data_family(fam).log_density(t, Y)),
                                   [0.5, 0.2, 0.3], rtol=1e-13)

    @pytest.mark.parametrize("sigma", [0.3, 1.0])
    def test_dirichlet(self, sigma):
        fam = DirichletPerturbationFamily(2, sigma)
        t = fam.vartheta_from_p([0.5, 0.3, 0.2])
        Y = np.array([[0.5, 2.0], [1.0, 1.0], [3.0, 0.2]])
        assert likelihood_divergence_repr_check(fam, t, Y) <= 1e-8

    def test_dirichlet_cost_form(self):
        fam = DirichletPerturbationFamily(2, 0.5)
        q = np.random.default_rng(0).dirichlet(np.ones(3), size=20)
        assert dirichlet_cost_form_check(fam, [0.5, 0.3, 0.2], q) <= 1e-8

    def test_gaussian_location(self):
        df = gaussian_location_data_family(2)
        theta = np.array([0.4, -1.1])
        x = np.array([[0.0, 0.0], [1.0, 2.0], [-0.5, 0.3]])
        expected = -0.5 * np.sum((x - theta) ** 2, axis=1) + 0.5 * np.sum(x ** 2, axis=1)
        np.testing.assert_allclose(df.log_density(theta, x), expected, rtol=1e-13)
        assert likelihood_divergence_repr_check(df, theta, x) <= 1e-12

    def test_support_condition_violated(self):
        with pytest.raises(SupportConditionViolated):
            as_data_family(QGaussianFamily(0.5))


class TestMLE:
    def test_single_point(self):
        fam = SimplexFamily(-0.5, 2)
        y = np.array([[0.3, 0.2]])
        r = mle_barycenter(fam, y)
        np.testing.assert_allclose(r.eta_hat, y[0], atol=1e-6)

    @pytest.mark.parametrize("lam", [-1.0, 0.5])
    def test_simplex_two_routes_and_frequencies(self, lam):
        fam = SimplexFamily(lam, 2)
        states = np.array([0, 0, 1, 2, 2, 2, 1, 0, 2, 2])
        Y = simplex_states_to_data(states, 2)
        a = mle_barycenter(fam, Y)
        b = mle_barycenter(fam, Y, method="likelihood")
        assert a.converged and b.converged
        np.testing.assert_allclose(a.eta_hat, b.eta_hat, atol=1e-5)
        # the simplex MLE is the empirical frequency vector
        freq = np.bincount(states, minlength=3) / states.size
        t = fam.vartheta_from_probs(freq)
        np.testing.assert_allclose(b.vartheta_hat, t, atol=1e-5)
        np.testing.assert_allclose(a.eta_hat, fam.dual_parameter(t), atol=1e-5)

    def test_dirichlet_recovery(self):
        fam = DirichletPerturbationFamily(2, 0.4)
        p = np.array([0.5, 0.3, 0.2])
        t = fam.vartheta_from_p(p)
        Q = fam.sample(t, 500, seed=1)
        Y = Q[:, 1:] / Q[:, :1]
        a = mle_barycenter(fam, Y)
        b = mle_barycenter(fam, Y, method="likelihood")
        np.testing.assert_allclose(a.eta_hat, b.eta_hat, atol=1e-4)
        se = dirichlet_standard_error(fam, t, 500)
        assert np.all(np.abs(a.eta_hat - p[1:] / p[0]) <= 3 * se)

    def test_gaussian_barycenter_is_mean(self):
        df = gaussian_location_data_family(2)
        Y = np.random.default_rng(2).normal(size=(30, 2))
        r = mle_barycenter(df, Y)
        np.testing.assert_allclose(r.eta_hat, Y.mean(axis=0), atol=1e-8)

    def test_out_of_domain_rows_are_counted(self):
        fam = SimplexFamily(0.5, 2)
        vertices = simplex_states_to_data(np.array([0, 1, 2, 1]), 2)
        assert mle_barycenter(fam, vertices).out_of_domain == 0
        r = mle_barycenter(fam, [[0.8, 0.5], [0.1, 0.1], [-0.2, 0.3]])
        assert r.out_of_domain == 2

    def test_wrong_columns(self):
        with pytest.raises(DataFormatError):
            mle_barycenter(SimplexFamily(0.5, 2), np.ones((3, 3)) * 0.1)

    def test_unknown_method(self):
        with pytest.raises(DomainViolation):
            mle_barycenter(SimplexFamily(0.5, 2), [[0.2, 0.3]], method="bayes")


class TestDualBarycenter:
    @pytest.mark.parametrize("lam", [-1.0, -0.3, 0.5])
    def test_argmin_is_dual_parameter(self, lam):
        fam = SimplexFamily(lam, 2)
        t = fam.vartheta_from_probs([0.5, 0.2, 0.3])
        r = dual_barycenter_check(fam, t)
        assert r.error <= 1e-6

    def test_grid_argmin(self):
        fam = SimplexFamily(-0.5, 2)
        t = fam.vartheta_from_probs([0.5, 0.2, 0.3])
        eta = fam.dual_parameter(t)
        g = np.arange(0.01, 1.0, 0.01)
        grid = np.array([[a, b] for a in g for b in g if a + b < 0.995])
        r = dual_barycenter_check(fam, t, grid)
        assert r.error <= 0.01

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.05, 0.9), st.floats(0.05, 0.9))
    def test_gap_is_kl(self, a, b):
        if a + b > 0.95:
            return
        lam = -0.5
        fam = SimplexFamily(lam, 2)
        u = np.array([0.5, 0.2, 0.3])
        t = fam.vartheta_from_probs(u)
        v = np.array([1 - a - b, a, b])
        tp = fam.vartheta_from_probs(v)
        eta, etap = fam.dual_parameter(t), fam.dual_parameter(tp)
        gap = expected_divergence(fam, t, etap) - expected_divergence(fam, t, eta)
        np.testing.assert_allclose(gap, kl_divergence(DiscreteDensity(u), DiscreteDensity(v)),
                                   atol=1e-8)

    def test_strict_convexity_through_minimizer(self):
        fam = SimplexFamily(0.5, 2)
        t = fam.vartheta_from_probs([0.5, 0.2, 0.3])
        eta = fam.dual_parameter(t)
        rng = np.random.default_rng(0)
        h = 1e-3
        for _ in range(8):
            d = rng.standard_normal(2)
            d /= np.linalg.norm(d)
            second = (expected_divergence(fam, t, eta + h * d) - 2 * expected_divergence(fam, t, eta)
                      + expected_divergence(fam, t, eta - h * d))
            assert second > 0


class TestMaxEnt:
    def test_self_competitor(self):
        fam = SimplexFamily(-0.5, 2)
        t = fam.vartheta_from_probs([0.5, 0.2, 0.3])
        r = maxent_check(fam, t, [fam.discrete(t)])
        np.testing.assert_allclose(r.gaps, 0.0, atol=1e-15)

    def test_simplex_ten_competitors(self):
        fam = SimplexFamily(0.5, 2)
        t = fam.vartheta_from_probs([0.5, 0.2, 0.3])
        comps = generate_competitors(fam, t, n=10, seed=1)
        r = maxent_check(fam, t, comps)
        assert r.min_gap >= -1e-12
        assert r.max_identity_residual <= 1e-8

    @pytest.mark.parametrize("lam", [-1.0, -0.3, 0.4, 0.8])
    def test_nondegenerate_family(self, lam):
        fam = FiniteFamily(lam, np.arange(5.0)[:, None])
        t = np.array([0.1])
        comps = generate_competitors(fam, t, n=50, seed=3)
        for P in comps:
            np.testing.assert_allclose(escort_mean(fam, P), escort_mean(fam, fam.probs(t)),
                                       atol=1e-10)
        r = maxent_check(fam, t, comps)
        assert r.min_gap >= -1e-12
        assert np.max(r.gaps) > 1e-4
        assert r.max_identity_residual <= 1e-8

    def test_mismatched_escort_mean(self):
        fam = FiniteFamily(-0.5, np.arange(4.0)[:, None])
        bad = DiscreteDensity(np.array([0.1, 0.2, 0.3, 0.4]))
        with pytest.raises(ConstraintViolated):
            maxent_check(fam, np.array([0.05]), [bad])

    def test_nonuniform_reference_rejected(self):
        fam = FiniteFamily(-0.5, np.arange(3.0)[:, None], [1.0, 2.0, 1.0])
        with pytest.raises(DomainViolation):
            maxent_check(fam, np.array([0.1]), [])


class TestLoadCSV:
    def test_header_and_values(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("y1,y2\n0.1,0.2\n0.3, 0.4\n\n")
        np.testing.assert_array_equal(load_data_csv(p, 2), [[0.1, 0.2], [0.3, 0.4]])

    def test_bad_cell_reports_position(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("0.1,0.2\n0.3,abc\n")
        with pytest.raises(DataFormatError, match="row 2, column 2"):
            load_data_csv(p)

    @pytest.mark.parametrize("text", ["0.1,0.2\n0.3\n", "", "0.1,nan\n"])
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "d.csv"
        p.write_text(text)
        with pytest.raises(DataFormatError):
            load_data_csv(p)

    def test_dimension_mismatch(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("0.1,0.2,0.3\n")
        with pytest.raises(DataFormatError):
            load_data_csv(p, 2)
