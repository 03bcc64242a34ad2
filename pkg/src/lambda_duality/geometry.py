"""Riemannian metric induced by a lambda-logarithmic divergence, the Fisher
metric, primal/dual pre-geodesics and the generalized Pythagorean relation.

The dualistic structure also has constant sectional curvature lambda; this
module does not compute curvature (no affine connections are implemented).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .divergences import log_divergence
from .errors import ChartViolation, InfiniteDivergence, NumericalError
from .lambda_core import (
    Potential,
    as_lambda,
    inverse_lambda_gradient,
    lambda_gradient,
    lambda_gradient_jacobian,
    transform_potential,
)
from .numerics import OptimizerConfig, fd_hessian


@dataclass(frozen=True)
class MetricTensor:
    """g(vartheta) as a callable; every evaluation is checked to be symmetric
    positive definite."""

    fn: Callable[[np.ndarray], np.ndarray]

    def at(self, vartheta) -> np.ndarray:
        g = np.atleast_2d(self.fn(np.atleast_1d(np.asarray(vartheta, float))))
        if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
            raise NumericalError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        if np.min(np.linalg.eigvalsh(g)) <= 0:
            raise NumericalError("metric is not positive definite")
        return g

    __call__ = at


def metric_matrix(lam, f: Potential, vartheta) -> np.ndarray:
    """Hess f + lambda grad f grad f^T."""
    lp = as_lambda(lam)
    t = np.atleast_1d(np.asarray(vartheta, float))
    H = f.hessian(t)
    if lp.classical:
        return 0.5 * (H + H.T)
    g = f.gradient(t)
    out = H + lp.lam * np.outer(g, g)
    return 0.5 * (out + out.T)


def metric(lam, f: Potential) -> MetricTensor:
    lp = as_lambda(lam)
    return MetricTensor(lambda t: metric_matrix(lp, f, t))


def conformal_metric(lam, f: Potential, vartheta) -> np.ndarray:
    """exp(-lambda f) Hess Phi with Phi = (exp(lambda f) - 1)/lambda (FD Hessian)."""
    lp = as_lambda(lam)
    t = np.atleast_1d(np.asarray(vartheta, float))
    Phi = transform_potential(lp, f)
    return math.exp(-lp.lam * f.value(t)) * fd_hessian(Phi, t)


# ---------------------------------------------------------------------------
# Metric from the divergence
# ---------------------------------------------------------------------------


def _div_fn(lp, f, t, orientation):
    if orientation == "first":
        return lambda d: log_divergence(lp, f, t + d, t)
    if orientation == "second":
        return lambda d: log_divergence(lp, f, t, t + d)
    raise ValueError("orientation must be 'first' or 'second'")


def _second_moment(L, dim, h):
    """Symmetric-difference estimate of g from L(Delta) = Delta^T g Delta / 2 + O(|Delta|^3)."""
    E = np.eye(dim)

    def S(d):
        return L(d) + L(-d)

    G = np.empty((dim, dim))
    for i in range(dim):
        G[i, i] = S(h * E[i]) / h ** 2
        for j in range(i):
            G[i, j] = G[j, i] = (S(h * (E[i] + E[j])) - S(h * (E[i] - E[j]))) / (4 * h ** 2)
    return G


def metric_from_divergence(lam, f: Potential, vartheta, orientation: str = "first",
                           h: float = 1e-3) -> np.ndarray:
    """g read off the second-order expansion of L[vartheta+Delta : vartheta]
    ("first") or L[vartheta : vartheta+Delta] ("second"), with one Richardson
    extrapolation step to remove the O(h^2) bias."""
    lp = as_lambda(lam)
    t = np.atleast_1d(np.asarray(vartheta, float))
    h = h * (1.0 + np.max(np.abs(t)))
    L = _div_fn(lp, f, t, orientation)
    G1 = _second_moment(L, t.size, h)
    G2 = _second_moment(L, t.size, h / 2)
    return (4.0 * G2 - G1) / 3.0


@dataclass(frozen=True)
class QuadraticApproxReport:
    radius: float
    max_residual: float       # max |L - Delta^T g Delta / 2|
    cubic_constant: float     # max |L - Delta^T g Delta / 2| / |Delta|^3


def quadratic_approx_check(lam, f: Potential, vartheta, radius: float,
                           n_directions: int = 16, seed: int = 0,
                           orientation: str = "first") -> QuadraticApproxReport:
    """Compare L[vartheta+Delta : vartheta] with Delta^T g Delta / 2 on
    |Delta| = radius along fixed random directions."""
    lp = as_lambda(lam)
    t = np.atleast_1d(np.asarray(vartheta, float))
    if radius == 0:
        return QuadraticApproxReport(0.0, 0.0, 0.0)
    g = metric_matrix(lp, f, t)
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((n_directions, t.size))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    L = _div_fn(lp, f, t, orientation)
    res = np.array([abs(L(radius * d) - 0.5 * radius ** 2 * d @ g @ d) for d in D])
    mx = float(res.max())
    return QuadraticApproxReport(radius, mx, mx / radius ** 3)


# ---------------------------------------------------------------------------
# Fisher metric
# ---------------------------------------------------------------------------


def fisher_metric(fam, vartheta, scheme=None) -> np.ndarray:
    """int (d log p)(d log p)^T p dnu in vartheta-coordinates.

    The score is F/(1 + lambda vartheta.F) - grad phi; since it has zero mean
    the metric is the covariance of F/(1 + lambda vartheta.F) under p, which is
    evaluated entirely by quadrature (no potential derivatives involved)."""
    t = fam._check(vartheta)
    sch = scheme or fam.scheme_for(t)
    x = sch.points
    F = fam.statistic(x)
    base = 1.0 + fam.lam.lam * (F @ t)
    m = base > 0
    logp = fam.log_kernel(t, x[m])
    lw = logp + np.log(sch.weights[m])
    w = np.exp(lw - lw.max())
    w /= w.sum()
    S = F[m] / base[m, None]
    mean = w @ S
    C = (S - mean).T @ (S * w[:, None] - np.outer(w, mean))
    return 0.5 * (C + C.T)


# ---------------------------------------------------------------------------
# Pre-geodesics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicPath:
    kind: str
    t: np.ndarray
    primal: np.ndarray
    dual: np.ndarray


def _chord(a, b, steps):
    ts = np.linspace(0.0, 1.0, int(steps))
    return ts, a + np.outer(ts, b - a)


def pre_geodesic(kind: str, lam, f: Potential, start, end, steps: int = 21,
                 cfg: OptimizerConfig | None = None) -> GeodesicPath:
    """Primal pre-geodesic: straight in vartheta.  Dual pre-geodesic: straight
    in eta = lambda-gradient.  Both charts are returned."""
    lp = as_lambda(lam)
    a = np.atleast_1d(np.asarray(start, float))
    b = np.atleast_1d(np.asarray(end, float))
    ts, pts = _chord(a, b, steps)
    if kind == "primal":
        if not all(f.domain.contains(p) for p in pts):
            raise ChartViolation("primal chord leaves the domain")
        duals = np.vstack([lambda_gradient(lp, f, p) for p in pts])
        return GeodesicPath(kind, ts, pts, duals)
    if kind == "dual":
        if f.dual_domain is not None and not all(f.dual_domain.contains(p) for p in pts):
            raise ChartViolation("dual chord leaves the dual domain")
        prim = []
        guess = np.asarray(f.start, float) if f.start is not None else None
        for p in pts:
            guess = inverse_lambda_gradient(lp, f, p, cfg, start=guess)
            prim.append(guess)
        return GeodesicPath(kind, ts, np.vstack(prim), pts)
    raise ValueError("kind must be 'primal' or 'dual'")


def chord_residual(points) -> float:
    """Max distance of the points to the segment joining the first and last."""
    P = np.atleast_2d(np.asarray(points, float))
    a, b = P[0], P[-1]
    c = b - a
    nn = float(c @ c)
    if nn == 0:
        return float(np.max(np.linalg.norm(P - a, axis=1)))
    s = (P - a) @ c / nn
    return float(np.max(np.linalg.norm(P - a - np.outer(s, c), axis=1)))


# ---------------------------------------------------------------------------
# Generalized Pythagorean relation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PythagorasResult:
    lhs: float
    rhs: float
    inner: float

    @property
    def defect(self) -> float:
        return abs(self.lhs - self.rhs)


def dual_tangent(lam, f: Potential, P, Q) -> np.ndarray:
    """Direction at Q of the dual pre-geodesic towards P, in the primal chart:
    J^{-1}(eta_P - eta_Q), J the Jacobian of vartheta -> eta at Q."""
    lp = as_lambda(lam)
    J = lambda_gradient_jacobian(lp, f, Q)
    return np.linalg.solve(J, lambda_gradient(lp, f, P) - lambda_gradient(lp, f, Q))


def pythagoras_check(lam, f: Potential, P, Q, R) -> PythagorasResult:
    """lhs = L[Q:P] + L[R:Q], rhs = L[R:P] and the g-inner product at Q of the
    primal tangent R - Q with the dual tangent towards P."""
    lp = as_lambda(lam)
    P, Q, R = (np.atleast_1d(np.asarray(x, float)) for x in (P, Q, R))
    vals = [log_divergence(lp, f, Q, P), log_divergence(lp, f, R, Q), log_divergence(lp, f, R, P)]
    if not all(np.isfinite(vals)):
        raise InfiniteDivergence("a divergence in the triple is infinite")
    g = metric_matrix(lp, f, Q)
    inner = float((R - Q) @ g @ dual_tangent(lp, f, P, Q))
    return PythagorasResult(vals[0] + vals[1], vals[2], inner)


def orthogonal_direction(lam, f: Potential, P, Q, rng=None) -> np.ndarray:
    """Unit vector d with d^T g_Q (dual tangent towards P) = 0."""
    lp = as_lambda(lam)
    Q = np.atleast_1d(np.asarray(Q, float))
    n = np.atleast_2d(metric_matrix(lp, f, Q) @ dual_tangent(lp, f, P, Q))
    if Q.size == 1:
        raise ValueError("orthogonal complements need dimension >= 2")
    rng = rng or np.random.default_rng(0)
    v = rng.standard_normal(Q.size)
    nn = n.ravel() / np.linalg.norm(n)
    v = v - (v @ nn) * nn
    return v / np.linalg.norm(v)


__all__ = [
    "MetricTensor", "metric", "metric_matrix", "conformal_metric",
    "metric_from_divergence", "quadratic_approx_check", "QuadraticApproxReport",
    "fisher_metric", "pre_geodesic", "GeodesicPath", "chord_residual",
    "pythagoras_check", "PythagorasResult", "dual_tangent", "orthogonal_direction",
]
