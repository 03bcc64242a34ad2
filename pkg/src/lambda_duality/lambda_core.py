"""The lambda-duality calculus: cost, c_lambda-conjugation, the lambda-gradient
(deformed Legendre map), its inverse and regularity certification.

Extended-real conventions: log t = -inf for t <= 0, 0^t = +inf for t < 0 and
(+inf) - (+inf) = -inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DomainViolation,
    NormalizationViolation,
    NotInRange,
    StartOutsideDomain,
    Unbounded,
)
from .numerics import (
    Domain,
    OptimizerConfig,
    Predicate,
    fd_gradient,
    fd_hessian,
    maximize,
)

CLASSICAL_THRESHOLD = 1e-8


@dataclass(frozen=True)
class LambdaParam:
    """Deformation parameter.  |lambda| < 1e-8 forces the classical limit."""

    lam: float
    classical: bool = False

    def __post_init__(self):
        lam = float(self.lam)
        if not math.isfinite(lam):
            raise ValueError("lambda must be finite")
        object.__setattr__(self, "lam", lam)
        if abs(lam) < CLASSICAL_THRESHOLD:
            object.__setattr__(self, "classical", True)
        if self.classical:
            object.__setattr__(self, "lam", 0.0)

    @property
    def q(self) -> float:
        return 1.0 - self.lam

    @property
    def mode(self) -> str:
        return "classical-limit" if self.classical else "deformed"

    @classmethod
    def classical_limit(cls) -> "LambdaParam":
        return cls(0.0, True)


def as_lambda(lam) -> LambdaParam:
    return lam if isinstance(lam, LambdaParam) else LambdaParam(float(lam))


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Potential:
    """Differentiable scalar function on an open convex domain.

    ``grad``/``hess`` are optional analytic derivatives; finite differences
    are used when they are missing.  ``dual_domain`` (if known) is the image
    of the lambda-gradient and is used as the search set when conjugating the
    conjugate.  ``start`` is a default interior point.
    """

    fn: Callable[[np.ndarray], float]
    domain: Domain
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    dual_domain: Domain | None = None
    start: tuple | None = None
    dual_start: tuple | None = None
    name: str = "potential"

    def value(self, u) -> float:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return float(self.fn(u))

    def __call__(self, u) -> float:
        return self.value(u)

    def gradient(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.grad is not None:
            return np.atleast_1d(np.asarray(self.grad(u), dtype=float))
        return fd_gradient(self.value, u, domain=self.domain)

    def hessian(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.hess is not None:
            return np.atleast_2d(np.asarray(self.hess(u), dtype=float))
        return fd_hessian(self, u, domain=self.domain)

    def without_derivatives(self) -> "Potential":
        """Copy that forces the finite-difference fallbacks."""
        return Potential(self.fn, self.domain, None, None, self.dual_domain,
                         self.start, self.dual_start, self.name + "[fd]")


@dataclass(frozen=True)
class RegularityReport:
    hessian_condition_ok: bool
    worst_eigenvalue: float
    normalization_condition_ok: bool
    min_normalization: float
    sample_points: int

    @property
    def ok(self) -> bool:
        return self.hessian_condition_ok and self.normalization_condition_ok


@dataclass(frozen=True)
class ConjugateResult:
    value: float
    argmax: np.ndarray
    converged: bool
    iterations: int


# ---------------------------------------------------------------------------
# Scalar kernels
# ---------------------------------------------------------------------------


def pairing(lam, u, v) -> float:
    """(1/lambda) log(1 + lambda u.v), i.e. -cost; u.v in the classical limit."""
    lam = as_lambda(lam)
    t = float(np.dot(np.atleast_1d(u), np.atleast_1d(v)))
    return _pairing_scalar(lam, t)


def _pairing_scalar(lam: LambdaParam, t: float) -> float:
    if lam.classical:
        return t
    s = 1.0 + lam.lam * t
    if s <= 0.0:
        return -math.inf if lam.lam > 0 else math.inf
    return math.log1p(lam.lam * t) / lam.lam


def cost(lam, u, v) -> float:
    """c_lambda(u, v) = -(1/lambda) log(1 + lambda u.v); -u.v in the classical
    limit.  Returns +-inf when 1 + lambda u.v <= 0."""
    return -pairing(lam, u, v)


def q_exp(q, t):
    """q-exponential [1 + (1-q) t]_+^(1/(1-q)) with 0^(negative) = +inf."""
    t = np.asarray(t, dtype=float)
    lam = 1.0 - float(q)
    if abs(lam) < CLASSICAL_THRESHOLD:
        return np.exp(t)
    base = 1.0 + lam * t
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        pos = np.exp(np.log1p(lam * np.where(base > 0, t, 0.0)) / lam)
    out = np.where(base > 0, pos, 0.0 if lam > 0 else np.inf)
    return out[()] if out.ndim == 0 else out


def q_log(q, s):
    """Inverse of q_exp on the positive axis: (s^(1-q) - 1)/(1-q)."""
    return box_cox(1.0 - float(q), s)


def exp_neg_cost(lam, u, v) -> float:
    """exp(-c_lambda(u, v)) computed as q_exp(1 - lambda, u.v)."""
    lam = as_lambda(lam)
    return float(q_exp(lam.q, float(np.dot(np.atleast_1d(u), np.atleast_1d(v)))))


def box_cox(lam, s):
    """(s^lambda - 1)/lambda, log s in the classical limit."""
    lam = as_lambda(lam)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainViolation("Box-Cox transform needs s > 0")
    if lam.classical:
        out = np.log(s)
    else:
        out = np.expm1(lam.lam * np.log(s)) / lam.lam
    return out[()] if out.ndim == 0 else out


def box_cox_inverse(lam, t):
    """(1 + lambda t)^(1/lambda), exp(t) in the classical limit."""
    lam = as_lambda(lam)
    t = np.asarray(t, dtype=float)
    if lam.classical:
        out = np.exp(t)
    else:
        if np.any(1.0 + lam.lam * t <= 0):
            raise DomainViolation("inverse Box-Cox needs 1 + lambda t > 0")
        out = np.exp(np.log1p(lam.lam * t) / lam.lam)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Conjugation
# ---------------------------------------------------------------------------


def _admissible_start(domain: Domain, candidates) -> np.ndarray:
    for c in candidates:
        if c is None:
            continue
        u = np.atleast_1d(np.asarray(c, dtype=float)).copy()
        for _ in range(80):
            if domain.contains(u):
                return u
            u = 0.5 * u
    raise StartOutsideDomain("no admissible starting point found")


def _pairing_domain(lam: LambdaParam, base: Domain, v: np.ndarray) -> Domain:
    if lam.classical:
        return base
    return base & Predicate(lambda u: 1.0 + lam.lam * float(u @ v) > 0.0)


def conjugate(lam, f: Potential, v, cfg: OptimizerConfig | None = None,
              start=None) -> ConjugateResult:
    """c_lambda-conjugate sup_u {(1/lambda) log(1 + lambda u.v) - f(u)}.

    In the classical limit this is the Legendre-Fenchel conjugate.  ``start``
    warm-starts the inner ascent.
    """
    lam = as_lambda(lam)
    cfg = cfg or OptimizerConfig()
    v = np.atleast_1d(np.asarray(v, dtype=float))
    dom = _pairing_domain(lam, f.domain, v)
    u0 = _admissible_start(dom, (start, f.start, np.zeros_like(v) + 0.5, np.ones_like(v)))

    def objective(u):
        return _pairing_scalar(lam, float(u @ v)) - f.value(u)

    def gradient(u):
        if lam.classical:
            return v - f.gradient(u)
        return v / (1.0 + lam.lam * float(u @ v)) - f.gradient(u)

    res = maximize(objective, gradient, dom, u0, cfg)
    if not lam.classical and lam.lam < 0:
        s = 1.0 + lam.lam * float(res.x @ v)
        if s < 1e-8:
            raise Unbounded("iterates approach 1 + lambda u.v = 0 where the objective is +inf")
    return ConjugateResult(res.value, res.x, res.converged, res.iterations)


def conjugate_potential(lam, f: Potential, cfg: OptimizerConfig | None = None,
                        start_hint=None) -> Potential:
    """The conjugate as a Potential.  Its gradient follows from the envelope
    theorem: d/dv f^c(v) = u*/(1 + lambda u*.v) with u* the argmax."""
    lam = as_lambda(lam)
    cfg = cfg or OptimizerConfig()
    if f.dual_domain is None:
        raise DomainViolation("conjugate_potential needs a declared dual domain")

    def fn(v):
        return conjugate(lam, f, v, cfg, start_hint).value

    def grad(v):
        r = conjugate(lam, f, v, cfg, start_hint)
        if lam.classical:
            return r.argmax
        return r.argmax / (1.0 + lam.lam * float(r.argmax @ v))

    return Potential(fn, f.dual_domain, grad, None, f.domain,
                     f.dual_start, f.start, f"conj({f.name})")


def biconjugate(lam, f: Potential, u, cfg: OptimizerConfig | None = None,
                v_start=None, u_hint=None) -> ConjugateResult:
    """(f^c)^c(u) computed by nested numerical conjugation.

    The outer ascent runs over the dual domain starting from ``v_start``
    (default: the potential's dual start).  The inner problems are
    warm-started at ``u_hint`` (default: ``u``).
    """
    lam = as_lambda(lam)
    cfg = cfg or OptimizerConfig()
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if f.dual_domain is None:
        raise DomainViolation("biconjugate needs a declared dual domain")
    hint = u if u_hint is None else u_hint
    fc = conjugate_potential(lam, f, cfg, hint)
    dom = _pairing_domain(lam, fc.domain, u)
    v0 = _admissible_start(dom, (v_start, f.dual_start))

    # evaluate inner conjugate once per point for value and gradient
    cache: dict = {}

    def inner(v):
        key = v.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = conjugate(lam, f, v, cfg, hint)
        return cache[key]

    def objective(v):
        return _pairing_scalar(lam, float(u @ v)) - inner(v).value

    def gradient(v):
        r = inner(v)
        if lam.classical:
            return u - r.argmax
        return (u / (1.0 + lam.lam * float(u @ v))
                - r.argmax / (1.0 + lam.lam * float(r.argmax @ v)))

    res = maximize(objective, gradient, dom, v0, cfg)
    return ConjugateResult(res.value, res.x, res.converged, res.iterations)


# ---------------------------------------------------------------------------
# Deformed Legendre map
# ---------------------------------------------------------------------------


def lambda_gradient(lam, f: Potential, u) -> np.ndarray:
    """v = grad f(u) / (1 - lambda grad f(u).u); grad f(u) in the classical limit."""
    lam = as_lambda(lam)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    g = f.gradient(u)
    if lam.classical:
        return g
    s = 1.0 - lam.lam * float(g @ u)
    if s <= 0:
        raise NormalizationViolation(
            f"1 - lambda grad f(u).u = {s:.3e} <= 0; f is not regular here")
    return g / s


def lambda_gradient_jacobian(lam, f: Potential, u) -> np.ndarray:
    """Jacobian of the lambda-gradient: H/s + lambda g (H u + g)^T / s^2."""
    lam = as_lambda(lam)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    g = f.gradient(u)
    H = f.hessian(u)
    if lam.classical:
        return H
    s = 1.0 - lam.lam * float(g @ u)
    return H / s + lam.lam * np.outer(g, H @ u + g) / s ** 2


def inverse_lambda_gradient(lam, f: Potential, v, cfg: OptimizerConfig | None = None,
                            start=None, method: str = "newton",
                            tol: float = 1e-11) -> np.ndarray:
    """Solve lambda_gradient(u) = v.

    ``newton`` runs a damped Newton iteration with the analytic Jacobian;
    ``conjugate`` returns the argmax of the numerical conjugate at v, which is
    the lambda-gradient of f^c.
    """
    lam = as_lambda(lam)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if method == "conjugate":
        r = conjugate(lam, f, v, cfg, start)
        if not r.converged:
            raise NotInRange("conjugate ascent did not converge")
        return r.argmax
    if method != "newton":
        raise ValueError(f"unknown method {method!r}")
    u = _admissible_start(f.domain, (start, f.start))

    def residual(x):
        try:
            return lambda_gradient(lam, f, x) - v
        except NormalizationViolation:
            return None

    r = residual(u)
    if r is None:
        raise NotInRange("normalization condition fails at the start point")
    scale = 1.0 + float(np.linalg.norm(v))
    for _ in range(200):
        rn = float(np.linalg.norm(r))
        if rn <= tol * scale:
            return u
        J = lambda_gradient_jacobian(lam, f, u)
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NotInRange("singular Jacobian in inverse lambda-gradient") from exc
        t = 1.0
        while t > 1e-12:
            un = u + t * delta
            if f.domain.contains(un):
                rnew = residual(un)
                if rnew is not None and np.linalg.norm(rnew) < (1 - 1e-4 * t) * rn:
                    u, r = un, rnew
                    break
            t *= 0.5
        else:
            if rn <= 1e3 * tol * scale:
                return u
            raise NotInRange("damped Newton stalled; v may be outside the range")
    raise NotInRange("inverse lambda-gradient did not converge")


# ---------------------------------------------------------------------------
# Regularity and duality checks
# ---------------------------------------------------------------------------


def transformed_hessian(lam, f: Potential, u) -> np.ndarray:
    """grad^2 f + lambda grad f grad f^T."""
    lam = as_lambda(lam)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    g = f.gradient(u)
    return f.hessian(u) + lam.lam * np.outer(g, g)


def check_regularity(lam, f: Potential, grid) -> RegularityReport:
    """Grid certificate of regular c_lambda-convexity."""
    lam = as_lambda(lam)
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    worst, norm_min = math.inf, math.inf
    for u in pts:
        A = transformed_hessian(lam, f, u)
        worst = min(worst, float(np.linalg.eigvalsh(0.5 * (A + A.T))[0]))
        g = f.gradient(u)
        norm_min = min(norm_min, 1.0 - lam.lam * float(g @ u))
    return RegularityReport(worst > 0, worst, norm_min > 0, norm_min, pts.shape[0])


def duality_gap(lam, f: Potential, u, cfg: OptimizerConfig | None = None,
                start=None) -> float:
    """|f(u) + f^c(v) - (1/lambda) log(1 + lambda u.v)| at v = lambda-gradient(u)."""
    lam = as_lambda(lam)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = lambda_gradient(lam, f, u)
    r = conjugate(lam, f, v, cfg, start)
    return abs(f.value(u) + r.value - pairing(lam, u, v))


def transform_potential(lam, f: Potential) -> Potential:
    """F_lambda = (e^(lambda f) - 1)/lambda, the Box-Cox transform of e^f."""
    lam = as_lambda(lam)
    if lam.classical:
        return f
    l = lam.lam

    def fn(u):
        return math.expm1(l * f.value(u)) / l

    def grad(u):
        return math.exp(l * f.value(u)) * f.gradient(u)

    return Potential(fn, f.domain, grad, None, None, f.start, None,
                     f"boxcox({f.name})")


def midpoint_convex(lam, f: Potential, a, b, tol: float = 1e-12) -> bool:
    """Midpoint convexity of (e^(lambda f) - 1)/lambda along [a, b]."""
    F = transform_potential(lam, f)
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    m = 0.5 * (a + b)
    return F.value(m) <= 0.5 * (F.value(a) + F.value(b)) + tol * (
        1 + abs(F.value(a)) + abs(F.value(b)))


__all__ = [
    "LambdaParam", "as_lambda", "Potential", "RegularityReport", "ConjugateResult",
    "pairing", "cost", "q_exp", "q_log", "exp_neg_cost", "box_cox", "box_cox_inverse",
    "conjugate", "conjugate_potential", "biconjugate", "lambda_gradient",
    "lambda_gradient_jacobian", "inverse_lambda_gradient", "transformed_hessian",
    "check_regularity", "duality_gap", "transform_potential", "midpoint_convex",
]
