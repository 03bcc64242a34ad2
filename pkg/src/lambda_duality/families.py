"""lambda-exponential families

    p(x; vartheta) = (1 + lambda vartheta.F(x))_+^(1/lambda) exp(-phi(vartheta))

with respect to a reference measure nu, plus the built-in instances: finite
state spaces (including the simplex), q-Gaussian, Student-t / Cauchy and the
Dirichlet perturbation model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .divergences import DensityFunction, DiscreteDensity
from .errors import (
    DomainViolation,
    IntegralDiverged,
    ParameterOutsideDomain,
    PositivityViolation,
    ReparameterizationOutOfRange,
    SupportConditionViolated,
)
from .lambda_core import LambdaParam, Potential, as_lambda, box_cox, lambda_gradient
from .numerics import Box, IntegrationScheme, OpenSimplex, Predicate, fd_jacobian
from .potentials import dirichlet_potential, qgaussian_potential, simplex_potential


@dataclass(frozen=True)
class FamilyPoint:
    vartheta: np.ndarray
    theta: np.ndarray
    phi_q: float
    eta: np.ndarray


class LambdaExpFamily:
    """Base class.  Subclasses provide the statistic, the reference measure
    (through integration schemes), the natural domain and, when known, a
    closed-form potential."""

    kind = "generic"
    nodes_default = 256

    def __init__(self, lam, dim: int, n_nodes: int | None = None):
        self.lam = as_lambda(lam)
        if self.lam.lam >= 1:
            raise DomainViolation("lambda-exponential families need lambda < 1 (q > 0)")
        self.dim = int(dim)
        self.n_nodes = int(n_nodes or self.nodes_default)

    # --- to be provided by subclasses ---------------------------------
    def statistic(self, x) -> np.ndarray:
        raise NotImplementedError

    def scheme_for(self, *varthetas) -> IntegrationScheme:
        raise NotImplementedError

    def contains(self, vartheta) -> bool:
        raise NotImplementedError

    def closed_potential(self, vartheta) -> float | None:
        return None

    def closed_gradient(self, vartheta) -> np.ndarray | None:
        return None

    def closed_hessian(self, vartheta) -> np.ndarray | None:
        return None

    @property
    def support_condition(self) -> bool:
        """True when the support of p(.; vartheta) does not depend on vartheta."""
        return True

    def parameters(self) -> dict:
        return {}

    def start(self) -> np.ndarray:
        raise NotImplementedError

    # --- generic machinery --------------------------------------------
    @property
    def q(self) -> float:
        return self.lam.q

    def _check(self, vartheta) -> np.ndarray:
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        if t.shape != (self.dim,) or not self.contains(t):
            raise ParameterOutsideDomain(f"vartheta={t.tolist()} is outside the natural domain")
        return t

    def log_kernel(self, vartheta, x) -> np.ndarray:
        """(1/lambda) log(1 + lambda vartheta.F(x)), -inf outside the support."""
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        s = self.statistic(x) @ t
        if self.lam.classical:
            return s
        base = 1.0 + self.lam.lam * s
        out = np.full(base.shape, -np.inf)
        m = base > 0
        out[m] = np.log1p(self.lam.lam * s[m]) / self.lam.lam
        if self.lam.lam < 0 and not np.all(m):
            raise ParameterOutsideDomain("1 + lambda vartheta.F(x) <= 0 with lambda < 0")
        return out

    def potential_quadrature(self, vartheta, scheme: IntegrationScheme | None = None) -> float:
        """log int exp_q(vartheta.F) dnu by quadrature."""
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        sch = scheme or self.scheme_for(t)
        lk = self.log_kernel(t, sch.points)
        m = np.isfinite(lk)
        if not np.any(m):
            raise IntegralDiverged("kernel vanishes on every node")
        out = special.logsumexp(lk[m], b=sch.weights[m])
        if not np.isfinite(out):
            raise IntegralDiverged("normalization integral diverged")
        return float(out)

    def potential(self, vartheta) -> float:
        t = self._check(vartheta)
        c = self.closed_potential(t)
        return self.potential_quadrature(t) if c is None else float(c)

    def log_density(self, vartheta, x) -> np.ndarray:
        t = self._check(vartheta)
        return self.log_kernel(t, x) - self.potential(t)

    def density(self, vartheta, x) -> np.ndarray:
        return np.exp(self.log_density(vartheta, x))

    def density_function(self, vartheta, scheme: IntegrationScheme | None = None) -> DensityFunction:
        t = self._check(vartheta)
        phi = self.potential(t)
        sch = scheme or self.scheme_for(t)
        return DensityFunction(lambda x: np.exp(self.log_kernel(t, x) - phi), sch,
                               lambda x: self.support(t, x))

    def support(self, vartheta, x) -> np.ndarray:
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        return 1.0 + self.lam.lam * (self.statistic(x) @ t) > 0

    def potential_function(self) -> Potential:
        """phi_lambda as a Potential (closed form with analytic derivatives
        where the subclass supplies them)."""
        has_grad = self.closed_gradient(self.start()) is not None
        has_hess = self.closed_hessian(self.start()) is not None
        return Potential(
            self.potential,
            Predicate(self.contains, self.dim, f"{self.kind}-domain"),
            self.closed_gradient if has_grad else None,
            self.closed_hessian if has_hess else None,
            self.dual_domain(), tuple(self.start()), None, f"phi[{self.kind}]",
        )

    def dual_domain(self):
        return None

    def dual_parameter(self, vartheta) -> np.ndarray:
        """eta = lambda-gradient of phi_lambda at vartheta."""
        t = self._check(vartheta)
        return lambda_gradient(self.lam, self.potential_function(), t)

    def escort_expectation(self, vartheta, scheme: IntegrationScheme | None = None) -> np.ndarray:
        """int F escort(q, p) dnu computed on the escort density directly."""
        t = self._check(vartheta)
        sch = scheme or self.scheme_for(t)
        lk = self.log_kernel(t, sch.points)
        m = np.isfinite(lk)
        logw = self.q * lk[m] + np.log(sch.weights[m])
        w = np.exp(logw - special.logsumexp(logw))
        return w @ self.statistic(sch.points[m])

    def point(self, vartheta) -> FamilyPoint:
        t = self._check(vartheta)
        theta, phi_q = self.to_subtractive(t)
        return FamilyPoint(t, theta, phi_q, self.dual_parameter(t))

    # --- subtractive / divisive ---------------------------------------
    def to_subtractive(self, vartheta):
        """theta = vartheta exp(-lambda phi), phi_q = (exp(-lambda phi) - 1)/(-lambda)."""
        t = self._check(vartheta)
        phi = self.potential(t)
        if self.lam.classical:
            return t.copy(), phi
        l = self.lam.lam
        return t * math.exp(-l * phi), -math.expm1(-l * phi) / l

    def _kappa(self, theta) -> float:
        """Positive root of (1/lambda) log kappa + phi(theta/kappa) = 0, i.e.
        kappa = 1 - lambda phi_q(theta)."""
        l = self.lam.lam

        def h(kappa):
            return math.log(kappa) / l + self.potential(theta / kappa)

        ks = [k for k in np.geomspace(1e-6, 1e6, 241) if self.contains(theta / k)]
        if not ks:
            raise ReparameterizationOutOfRange("no kappa > 0 keeps theta/kappa in the domain")
        vals = [h(k) for k in ks]
        for k0, k1, v0, v1 in zip(ks[:-1], ks[1:], vals[:-1], vals[1:]):
            if v0 == 0:
                return k0
            if v0 * v1 < 0:
                return optimize.brentq(h, k0, k1, xtol=1e-15, rtol=1e-15)
        raise ReparameterizationOutOfRange(
            "1 - lambda phi_q(theta) > 0 has no solution for this theta")

    def subtractive_potential(self, theta, c: float = 0.0, theta0=None) -> float:
        """phi_q(theta) with int exp_q(theta.(F - c theta0) - phi_q) dnu = 1.

        The shift c theta0 of the statistic only moves phi_q by -c theta.theta0;
        c is a free constant supplied by the caller (c = 0 is the default)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        shift = 0.0 if theta0 is None else c * float(theta @ np.asarray(theta0, float))
        if self.lam.classical:
            return self.potential(theta) - shift
        return (1.0 - self._kappa(theta)) / self.lam.lam - shift

    def to_divisive(self, theta) -> np.ndarray:
        """vartheta = theta / (1 - lambda phi_q(theta)); needs 1 - lambda phi_q > 0."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.lam.classical:
            return theta.copy()
        return theta / self._kappa(theta)

    # --- sampling / serialization --------------------------------------
    def sample(self, vartheta, n: int, seed: int = 0):
        raise NotImplementedError(f"no sampler for family kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "family_kind": self.kind,
            "lambda": self.lam.lam,
            "parameters": self.parameters(),
            "scheme": {"n_nodes": self.n_nodes},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Finite state spaces
# ---------------------------------------------------------------------------


class FiniteFamily(LambdaExpFamily):
    """Family on states 0..n-1 with statistic rows F[x] and reference weights.

    The natural domain enforces 1 + lambda vartheta.F(x) > 0 at every state, so
    all members have full support.
    """

    kind = "finite"

    def __init__(self, lam, stats, weights=None):
        F = np.atleast_2d(np.asarray(stats, dtype=float))
        super().__init__(lam, F.shape[1])
        self.F = F
        self.F.setflags(write=False)
        self.ref = np.ones(F.shape[0]) if weights is None else np.asarray(weights, float)
        if np.any(self.ref <= 0):
            raise DomainViolation("reference weights must be positive")
        self._scheme = IntegrationScheme.finite_sum(np.arange(F.shape[0]), self.ref)

    @property
    def n_states(self) -> int:
        return self.F.shape[0]

    def statistic(self, x):
        return self.F[np.asarray(x, dtype=int)]

    def scheme_for(self, *varthetas):
        return self._scheme

    def contains(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        if t.shape != (self.dim,) or not np.all(np.isfinite(t)):
            return False
        if self.lam.classical:
            return True
        return bool(np.all(1.0 + self.lam.lam * (self.F @ t) > 0))

    def _parts(self, t):
        s = self.F @ t
        if self.lam.classical:
            b = np.exp(s)
            return b, b, b
        base = 1.0 + self.lam.lam * s
        b = np.exp(np.log(base) / self.lam.lam)
        return b, b / base, (1.0 - self.lam.lam) * b / base ** 2

    def closed_potential(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        return float(np.log(self.ref @ self._parts(t)[0]))

    def closed_gradient(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        b, db, _ = self._parts(t)
        return (self.ref * db) @ self.F / (self.ref @ b)

    def closed_hessian(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        b, db, d2b = self._parts(t)
        S = self.ref @ b
        g = (self.ref * db) @ self.F / S
        return (self.F.T * (self.ref * d2b)) @ self.F / S - np.outer(g, g)

    def probs(self, vartheta) -> np.ndarray:
        """State probabilities: density with respect to the reference times its weights."""
        return self.ref * self.density(vartheta, np.arange(self.n_states))

    def discrete(self, vartheta) -> DiscreteDensity:
        return DiscreteDensity.normalized(self.probs(vartheta))

    def start(self):
        return np.zeros(self.dim)

    def parameters(self):
        return {"stats": self.F.tolist(), "weights": self.ref.tolist()}

    def sample(self, vartheta, n, seed=0):
        rng = np.random.default_rng(seed)
        return rng.choice(self.n_states, size=int(n), p=self.discrete(vartheta).probs)


class SimplexFamily(FiniteFamily):
    """Finite simplex on d+1 states: F(0) = 0 and F(i) = e_i.

    vartheta_i is the Box-Cox transform of u_i/u_0 and phi = -log u_0."""

    kind = "simplex"

    def __init__(self, lam, dim: int):
        F = np.vstack([np.zeros((1, dim)), np.eye(dim)])
        super().__init__(lam, F)

    def vartheta_from_probs(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.atleast_1d(box_cox(self.lam, u[1:] / u[0]))

    def potential_function(self) -> Potential:
        return simplex_potential(self.lam, self.dim)

    def dual_domain(self):
        return OpenSimplex(self.dim)

    def parameters(self):
        return {"dim": self.dim}


# ---------------------------------------------------------------------------
# q-Gaussian
# ---------------------------------------------------------------------------


def qgaussian_log_normalizer(lam) -> float:
    """log int exp_q(-x^2) dx via Beta functions (q = 1 - lambda)."""
    l = as_lambda(lam).lam
    if l == 0:
        return 0.5 * math.log(math.pi)
    if l > 0:
        return special.betaln(0.5, 1.0 / l + 1.0) - 0.5 * math.log(l)
    if l <= -2:
        raise IntegralDiverged("q-Gaussian is not normalizable for lambda <= -2")
    return special.betaln(0.5, -1.0 / l - 0.5) - 0.5 * math.log(-l)


class QGaussianFamily(LambdaExpFamily):
    """F(x) = -x^2 on the real line; Omega = (0, inf); needs lambda > -2.

    The additive constant of phi(vartheta) = -log(vartheta)/2 + C comes from
    the Beta-function normalizer; quadrature converges slowly in the heavy
    tails near lambda = -2."""

    kind = "q-gaussian"
    nodes_default = 512

    def __init__(self, lam, n_nodes: int | None = None):
        super().__init__(lam, 1, n_nodes)
        if self.lam.lam <= -2:
            raise DomainViolation("the q-Gaussian needs lambda > -2 (q < 3)")
        self.constant = qgaussian_log_normalizer(self.lam)

    def statistic(self, x):
        x = np.asarray(x, dtype=float)
        return -(x ** 2)[:, None]

    def radius(self, vartheta) -> float:
        """Support half-width 1/sqrt(lambda vartheta) (finite only for lambda > 0)."""
        t = float(np.atleast_1d(vartheta)[0])
        return 1.0 / math.sqrt(self.lam.lam * t) if self.lam.lam > 0 else math.inf

    def scheme_for(self, *varthetas):
        ts = [float(np.atleast_1d(t)[0]) for t in varthetas] or [1.0]
        if self.lam.lam > 0:
            return IntegrationScheme.sine_legendre(0.0, self.radius(max(ts)), self.n_nodes)
        scale = 1.0 / math.sqrt(math.sqrt(min(ts) * max(ts)))
        return IntegrationScheme.tangent_legendre(0.0, scale, self.n_nodes)

    def contains(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        return bool(t.shape == (1,) and np.isfinite(t[0]) and t[0] > 0)

    @property
    def support_condition(self):
        return self.lam.lam <= 0

    def closed_potential(self, vartheta):
        return -0.5 * math.log(float(np.atleast_1d(vartheta)[0])) + self.constant

    def closed_gradient(self, vartheta):
        return np.array([-0.5 / float(np.atleast_1d(vartheta)[0])])

    def closed_hessian(self, vartheta):
        return np.array([[0.5 / float(np.atleast_1d(vartheta)[0]) ** 2]])

    def potential_function(self):
        return qgaussian_potential(self.constant)

    def dual_domain(self):
        return Box.negative_orthant(1)

    def dual_parameter_closed(self, vartheta) -> np.ndarray:
        return np.array([-1.0 / ((2.0 + self.lam.lam) * float(np.atleast_1d(vartheta)[0]))])

    def start(self):
        return np.array([1.0])

    def sample(self, vartheta, n, seed=0):
        t = float(self._check(vartheta)[0])
        l = self.lam.lam
        rng = np.random.default_rng(seed)
        if self.lam.classical:
            return rng.normal(0.0, math.sqrt(0.5 / t), int(n))
        if l > 0:
            b = rng.beta(0.5, 1.0 / l + 1.0, int(n))
            sign = rng.choice([-1.0, 1.0], int(n))
            return sign * np.sqrt(b) * self.radius(t)
        k = 2.0 / -l - 1.0
        scale = math.sqrt(1.0 / (k * -l * t))
        return scale * rng.standard_t(k, int(n))


# ---------------------------------------------------------------------------
# Student t (Cauchy for df = 1, dimension 1)
# ---------------------------------------------------------------------------


def _quad_index(n: int):
    return [(i, j) for i in range(n) for j in range(i, n)]


class StudentTFamily(LambdaExpFamily):
    """Location-scale Student-t in dimension n in {1, 2} with df k.

    lambda = -2/(k + n), F(x) = (x, upper-triangular entries of x x^T).
    Parameters: vartheta_lin = b/lambda and the quadratic form
    x^T M x = lambda * sum vartheta_quad x_i x_j, where
    b = -2 P mu / s, M = P / s, P = Sigma^{-1}/k and s = 1 + mu^T P mu.
    """

    kind = "student-t"
    nodes_default = 512

    def __init__(self, df: float, ndim: int = 1, n_nodes: int | None = None):
        if ndim not in (1, 2):
            raise DomainViolation("Student-t family supports dimension 1 or 2")
        self.df = float(df)
        self.ndim = int(ndim)
        self.qidx = _quad_index(self.ndim)
        lam = -2.0 / (self.df + self.ndim)
        super().__init__(lam, self.ndim + len(self.qidx),
                         n_nodes or (512 if ndim == 1 else 96))
        k, n = self.df, self.ndim
        self.log_A = (special.gammaln(0.5 * (k + n)) - special.gammaln(0.5 * k)
                      - 0.5 * n * math.log(k * math.pi))

    # parameter maps ------------------------------------------------------
    def _split(self, t):
        n, l = self.ndim, self.lam.lam
        b = l * t[:n]
        M = np.zeros((n, n))
        for c, (i, j) in enumerate(self.qidx):
            if i == j:
                M[i, i] = l * t[n + c]
            else:
                M[i, j] = M[j, i] = 0.5 * l * t[n + c]
        return b, M

    def vartheta_from_location_scale(self, mu, Sigma) -> np.ndarray:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        P = np.linalg.inv(Sigma) / self.df
        s = 1.0 + mu @ P @ mu
        M, b = P / s, -2.0 * P @ mu / s
        l = self.lam.lam
        quad = [M[i, i] / l if i == j else 2.0 * M[i, j] / l for (i, j) in self.qidx]
        return np.concatenate([b / l, quad])

    def location_scale(self, vartheta):
        b, M = self._split(self._check(vartheta))
        mu = -0.5 * np.linalg.solve(M, b)
        s = 1.0 / (1.0 - mu @ M @ mu)
        Sigma = np.linalg.inv(self.df * s * M)
        return mu, Sigma

    def statistic(self, x):
        x = np.asarray(x, dtype=float)
        if self.ndim == 1:
            x = x.reshape(-1, 1)
        quad = [x[:, i] * x[:, j] for (i, j) in self.qidx]
        return np.column_stack([x] + quad)

    def contains(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        if t.shape != (self.dim,) or not np.all(np.isfinite(t)):
            return False
        b, M = self._split(t)
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            return False
        return bool(0.25 * b @ np.linalg.solve(M, b) < 1.0)

    def closed_potential(self, vartheta):
        b, M = self._split(np.atleast_1d(np.asarray(vartheta, float)))
        n, k, l = self.ndim, self.df, self.lam.lam
        r = 1.0 - 0.25 * b @ np.linalg.solve(M, b)
        _, logdet = np.linalg.slogdet(M)
        return (-self.log_A - 0.5 * n * math.log(k) - 0.5 * logdet
                + (0.5 * n + 1.0 / l) * math.log(r))

    def closed_gradient(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, float))
        b, M = self._split(t)
        n, l = self.ndim, self.lam.lam
        Mi = np.linalg.inv(M)
        Mib = Mi @ b
        r = 1.0 - 0.25 * b @ Mib
        c = 0.5 * n + 1.0 / l
        G = -0.5 * Mi + c * np.outer(Mib, Mib) / (4.0 * r)   # d phi / d M
        gb = -c * Mib / (2.0 * r)                             # d phi / d b
        quad = [l * G[i, j] for (i, j) in self.qidx]
        return np.concatenate([l * gb, quad])

    def closed_hessian(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, float))
        H = fd_jacobian(self.closed_gradient, t)
        return 0.5 * (H + H.T)

    def dual_parameter_closed(self, vartheta) -> np.ndarray:
        """(mu, entries of Sigma + mu mu^T): the escort of a t_k law is a
        t_{k+2} law whose covariance equals Sigma."""
        mu, Sigma = self.location_scale(vartheta)
        S2 = Sigma + np.outer(mu, mu)
        return np.concatenate([mu, [S2[i, j] for (i, j) in self.qidx]])

    def dual_domain(self):
        if self.ndim == 1:
            return Predicate(lambda v: v[1] > v[0] ** 2, 2, "t-dual")
        n = self.ndim

        def ok(v):
            mu = v[:n]
            S2 = np.zeros((n, n))
            for c, (i, j) in enumerate(self.qidx):
                S2[i, j] = S2[j, i] = v[n + c]
            return bool(np.all(np.linalg.eigvalsh(S2 - np.outer(mu, mu)) > 0))

        return Predicate(ok, self.dim, "t-dual")

    def scheme_for(self, *varthetas):
        ts = varthetas or (self.start(),)
        mus, Sigmas = zip(*(self.location_scale(t) for t in ts))
        mu = np.mean(mus, axis=0)
        S = np.mean(Sigmas, axis=0) + np.cov(np.array(mus).T, bias=True).reshape(
            self.ndim, self.ndim) if len(mus) > 1 else Sigmas[0]
        if self.ndim == 1:
            return IntegrationScheme.tangent_legendre(float(mu[0]), math.sqrt(S[0, 0]),
                                                      self.n_nodes)
        L = np.linalg.cholesky(S)
        t, w = np.polynomial.legendre.leggauss(self.n_nodes)
        t, w = 0.5 * np.pi * t, 0.5 * np.pi * w
        z, jac = np.tan(t), w / np.cos(t) ** 2
        Z1, Z2 = np.meshgrid(z, z, indexing="ij")
        W = np.outer(jac, jac).ravel() * abs(np.linalg.det(L))
        pts = np.column_stack([Z1.ravel(), Z2.ravel()]) @ L.T + mu
        return IntegrationScheme.finite_sum(pts, W, tolerance=1e-8,
                                            transform="tangent2d", n=self.n_nodes)

    def start(self):
        return self.vartheta_from_location_scale(np.zeros(self.ndim), np.eye(self.ndim))

    def parameters(self):
        return {"df": self.df, "ndim": self.ndim}

    def to_dict(self):
        d = super().to_dict()
        d["lambda"] = self.lam.lam
        return d

    def sample(self, vartheta, n, seed=0):
        mu, Sigma = self.location_scale(vartheta)
        rng = np.random.default_rng(seed)
        z = rng.multivariate_normal(np.zeros(self.ndim), Sigma, int(n))
        g = rng.chisquare(self.df, int(n)) / self.df
        x = mu + z / np.sqrt(g)[:, None]
        return x[:, 0] if self.ndim == 1 else x


class CauchyFamily(StudentTFamily):
    """Cauchy location-scale family: Student-t with one degree of freedom in
    dimension one, lambda = -1, vartheta = (2 mu, -1)/(mu^2 + sigma^2)."""

    kind = "cauchy"

    def __init__(self, n_nodes: int | None = None):
        super().__init__(1.0, 1, n_nodes)

    def vartheta_from_mu_sigma(self, mu: float, sigma: float) -> np.ndarray:
        S = mu ** 2 + sigma ** 2
        return np.array([2.0 * mu / S, -1.0 / S])

    def mu_sigma(self, vartheta):
        t = self._check(vartheta)
        mu = -t[0] / (2.0 * t[1])
        return mu, math.sqrt((-4.0 * t[1] - t[0] ** 2) / (4.0 * t[1] ** 2))

    def parameters(self):
        return {}


# ---------------------------------------------------------------------------
# Dirichlet perturbation
# ---------------------------------------------------------------------------


def perturb(p, q) -> np.ndarray:
    """Compositional perturbation (p + q)_i = p_i q_i / sum_k p_k q_k."""
    r = np.asarray(p, float) * np.asarray(q, float)
    return r / r.sum(axis=-1, keepdims=True)


class DirichletPerturbationFamily(LambdaExpFamily):
    """Q = p (+) D with D ~ Dirichlet(a, ..., a), a = 1/(sigma (1 + d)).

    lambda = -sigma, F_i(q) = q_i/q_0, vartheta_i = p_0/(lambda p_i) < 0.
    The reference measure has density C' prod F_i^a / prod_{i=0}^d q_i with
    respect to Lebesgue measure on (q_1, ..., q_d), where
    C' = Gamma((d+1)a)/Gamma(a)^(d+1) |lambda|^(a d).  Integration happens in
    additive log-ratio coordinates z_i = log(q_i/q_0), in which
    dq/prod q_i = dz.
    """

    kind = "dirichlet-perturbation"
    nodes_default = 400

    def __init__(self, dim: int, sigma: float, n_nodes: int | None = None):
        if sigma <= 0:
            raise DomainViolation("sigma must be positive")
        self.sigma = float(sigma)
        super().__init__(-self.sigma, dim, n_nodes or (400 if dim == 1 else 450))
        d, l = self.dim, self.lam.lam
        self.a = 1.0 / (self.sigma * (1 + d))
        self.log_C = special.gammaln((d + 1) * self.a) - (d + 1) * special.gammaln(self.a)
        self.log_Cnu = self.log_C + self.a * d * math.log(abs(l))

    def vartheta_from_p(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        return p[0] / (self.lam.lam * p[1:])

    def p_from_vartheta(self, vartheta) -> np.ndarray:
        t = self._check(vartheta)
        r = 1.0 / (self.lam.lam * t)  # p_i / p_0
        return np.concatenate([[1.0], r]) / (1.0 + r.sum())

    def statistic(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        return x[:, 1:] / x[:, :1]

    def contains(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, dtype=float))
        return bool(t.shape == (self.dim,) and np.all(np.isfinite(t)) and np.all(t < 0))

    def closed_potential(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, float))
        return float(np.sum(np.log(-t))) / (self.lam.lam * (1 + self.dim))

    def closed_gradient(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, float))
        return 1.0 / (self.lam.lam * (1 + self.dim) * t)

    def closed_hessian(self, vartheta):
        t = np.atleast_1d(np.asarray(vartheta, float))
        return np.diag(-1.0 / (self.lam.lam * (1 + self.dim) * t ** 2))

    def potential_function(self):
        return dirichlet_potential(self.lam, self.dim)

    def dual_domain(self):
        return Box.positive_orthant(self.dim)

    def scheme_for(self, *varthetas):
        ts = varthetas or (self.start(),)
        centers = np.mean([-np.log(self.lam.lam * np.asarray(t, float)) for t in ts], axis=0)
        rate = min(self.a, -1.0 / self.lam.lam - self.a * self.dim)
        half = min(45.0 / max(rate, 1e-3), 600.0)
        x, w = np.polynomial.legendre.leggauss(self.n_nodes)
        grids = np.meshgrid(*([x * half] * self.dim), indexing="ij")
        wgr = np.meshgrid(*([w * half] * self.dim), indexing="ij")
        z = np.column_stack([g.ravel() for g in grids]) + centers
        wz = np.prod(np.column_stack([g.ravel() for g in wgr]), axis=1)
        q = np.exp(np.column_stack([np.zeros(len(z)), z]) - special.logsumexp(
            np.column_stack([np.zeros(len(z)), z]), axis=1, keepdims=True))
        logw = np.log(wz) + self.log_Cnu + self.a * z.sum(axis=1)
        return IntegrationScheme.finite_sum(q, np.exp(logw), tolerance=1e-8,
                                            transform="alr", half_width=half,
                                            n=self.n_nodes)

    def log_lebesgue_density(self, p, q) -> np.ndarray:
        """Density of Q = p (+) D on (q_1..q_d) with respect to Lebesgue measure:
        C prod (q_i/p_i)^a (sum q_i/p_i)^(1/lambda) / prod q_i."""
        q = np.atleast_2d(np.asarray(q, float))
        p = np.asarray(p, float)
        r = q / p
        return (self.log_C - np.log(q).sum(axis=1) + self.a * np.log(r).sum(axis=1)
                + np.log(r.sum(axis=1)) / self.lam.lam)

    def start(self):
        return np.full(self.dim, 1.0 / self.lam.lam)

    def parameters(self):
        return {"dim": self.dim, "sigma": self.sigma}

    def sample(self, vartheta, n, seed=0):
        p = self.p_from_vartheta(vartheta)
        rng = np.random.default_rng(seed)
        D = rng.dirichlet(np.full(self.dim + 1, self.a), int(n))
        return perturb(p, D)


def dirichlet_cost(p, q) -> np.ndarray:
    """log((1/(1+d)) sum q_i/p_i) - (1/(1+d)) sum log(q_i/p_i)."""
    q = np.atleast_2d(np.asarray(q, float))
    r = q / np.asarray(p, float)
    n = r.shape[1]
    return np.log(r.mean(axis=1)) - np.log(r).sum(axis=1) / n


# ---------------------------------------------------------------------------
# alpha-families
# ---------------------------------------------------------------------------


class AlphaFamily(FiniteFamily):
    """alpha-family p(x; xi) proportional to (sum_i theta_i(xi) F_i(x))^(1/lambda)
    with lambda = (1 - alpha)/2, rewritten as a lambda-exponential family with
    statistic F_i/F_0 and reference weights F_0^(1/lambda)."""

    kind = "alpha-family"

    def __init__(self, lam, stats, theta_fns: Sequence[Callable], weights=None):
        S = np.atleast_2d(np.asarray(stats, dtype=float))
        if np.any(S[:, 0] <= 0):
            raise PositivityViolation("F_0 must be strictly positive")
        l = as_lambda(lam)
        if l.classical:
            raise DomainViolation("alpha-family reparameterization needs lambda != 0")
        base = np.ones(S.shape[0]) if weights is None else np.asarray(weights, float)
        super().__init__(l, S[:, 1:] / S[:, :1], base * S[:, 0] ** (1.0 / l.lam))
        self.raw_stats = S
        self.theta_fns = tuple(theta_fns)
        self.base_weights = base

    def vartheta(self, xi) -> np.ndarray:
        th = np.array([f(xi) for f in self.theta_fns], dtype=float)
        if th[0] <= 0:
            raise PositivityViolation("theta_0(xi) must be positive")
        return th[1:] / (self.lam.lam * th[0])

    def alpha_density(self, xi) -> np.ndarray:
        """Direct normalization of (sum theta_i F_i)_+^(1/lambda)."""
        th = np.array([f(xi) for f in self.theta_fns], dtype=float)
        s = self.raw_stats @ th
        if np.any(s <= 0):
            raise PositivityViolation("sum theta_i F_i must be positive")
        logw = np.log(self.base_weights) + np.log(s) / self.lam.lam
        return np.exp(logw - special.logsumexp(logw))

    def parameters(self):
        return {"stats": self.raw_stats.tolist(), "weights": self.base_weights.tolist()}


def alpha_family_reparameterize(theta_fns, stats, lam, weights=None) -> AlphaFamily:
    """Build the lambda-exponential form of an alpha-family on a finite space.

    ``stats`` has one row per state with columns F_0, F_1, ..., F_d (F_0 > 0);
    ``theta_fns`` are the coefficient functions theta_0(xi), ..., theta_d(xi).
    """
    return AlphaFamily(lam, stats, theta_fns, weights)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def family_from_dict(d: dict) -> LambdaExpFamily:
    kind, lam, par = d["family_kind"], d["lambda"], d.get("parameters", {})
    n_nodes = d.get("scheme", {}).get("n_nodes")
    if kind == "simplex":
        return SimplexFamily(lam, par["dim"])
    if kind == "finite":
        return FiniteFamily(lam, par["stats"], par.get("weights"))
    if kind == "q-gaussian":
        return QGaussianFamily(lam, n_nodes)
    if kind == "cauchy":
        return CauchyFamily(n_nodes)
    if kind == "student-t":
        fam = StudentTFamily(par["df"], par.get("ndim", 1), n_nodes)
        if abs(fam.lam.lam - lam) > 1e-12:
            raise DomainViolation("lambda inconsistent with the degrees of freedom")
        return fam
    if kind == "dirichlet-perturbation":
        if abs(lam + par["sigma"]) > 1e-12:
            raise DomainViolation("lambda must equal -sigma")
        return DirichletPerturbationFamily(par["dim"], par["sigma"], n_nodes)
    raise DomainViolation(f"unknown family kind {kind!r}")


def family_from_json(s: str) -> LambdaExpFamily:
    return family_from_dict(json.loads(s))


__all__ = [
    "FamilyPoint", "LambdaExpFamily", "FiniteFamily", "SimplexFamily",
    "QGaussianFamily", "StudentTFamily", "CauchyFamily",
    "DirichletPerturbationFamily", "AlphaFamily", "alpha_family_reparameterize",
    "qgaussian_log_normalizer", "perturb", "dirichlet_cost",
    "family_from_dict", "family_from_json", "SupportConditionViolated", "LambdaParam",
]
