"""Numerical substrate: quadrature schemes, finite differences, open domains
and a projected gradient ascent with Armijo backtracking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.stats import qmc

from .errors import (
    DomainViolation,
    NoAscentDirection,
    NonFiniteIntegrand,
    StartOutsideDomain,
    Unbounded,
)

EPS = np.finfo(float).eps
FD_STEP = EPS ** (1.0 / 3.0)
FD_STEP_2ND = EPS ** (1.0 / 4.0)


# ---------------------------------------------------------------------------
# Open domains
# ---------------------------------------------------------------------------


class Domain:
    """Open set descriptor.  Subclasses override ``contains`` and optionally
    ``project`` (the default projection is the identity)."""

    def contains(self, u: np.ndarray) -> bool:
        raise NotImplementedError

    def project(self, u: np.ndarray, margin: float) -> np.ndarray:
        return u

    def __and__(self, other: "Domain") -> "Domain":
        return Intersection((self, other))

    def __contains__(self, u) -> bool:
        return self.contains(np.atleast_1d(np.asarray(u, dtype=float)))


@dataclass(frozen=True)
class Box(Domain):
    """Open box prod_i (lower_i, upper_i); infinite bounds allowed."""

    lower: tuple
    upper: tuple

    @classmethod
    def make(cls, lower, upper) -> "Box":
        lo = tuple(float(x) for x in np.atleast_1d(lower))
        hi = tuple(float(x) for x in np.atleast_1d(upper))
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box bounds must satisfy lower < upper componentwise")
        return cls(lo, hi)

    @classmethod
    def real_space(cls, dim: int) -> "Box":
        return cls((-math.inf,) * dim, (math.inf,) * dim)

    @classmethod
    def positive_orthant(cls, dim: int) -> "Box":
        return cls((0.0,) * dim, (math.inf,) * dim)

    @classmethod
    def negative_orthant(cls, dim: int) -> "Box":
        return cls((-math.inf,) * dim, (0.0,) * dim)

    def contains(self, u):
        u = np.asarray(u, dtype=float)
        return bool(
            u.shape == (len(self.lower),)
            and np.all(np.isfinite(u))
            and np.all(u > np.asarray(self.lower))
            and np.all(u < np.asarray(self.upper))
        )

    def project(self, u, margin):
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        flo, fhi = np.isfinite(lo), np.isfinite(hi)
        lo_f, hi_f = np.where(flo, lo, 0.0), np.where(fhi, hi, 0.0)
        lo_m = np.where(flo, lo_f + margin * (1.0 + np.abs(lo_f)), -np.inf)
        hi_m = np.where(fhi, hi_f - margin * (1.0 + np.abs(hi_f)), np.inf)
        return np.clip(u, lo_m, hi_m)


@dataclass(frozen=True)
class OpenSimplex(Domain):
    """Open unit simplex in reduced coordinates: u_i > 0, sum(u) < 1."""

    dim: int

    def contains(self, u):
        u = np.asarray(u, dtype=float)
        return bool(
            u.shape == (self.dim,)
            and np.all(np.isfinite(u))
            and np.all(u > 0)
            and u.sum() < 1.0
        )


@dataclass(frozen=True)
class Predicate(Domain):
    """Domain given by an arbitrary membership test."""

    test: Callable[[np.ndarray], bool]
    dim: int | None = None
    label: str = "predicate"

    def contains(self, u):
        u = np.asarray(u, dtype=float)
        if self.dim is not None and u.shape != (self.dim,):
            return False
        if not np.all(np.isfinite(u)):
            return False
        return bool(self.test(u))


@dataclass(frozen=True)
class Intersection(Domain):
    parts: tuple

    def contains(self, u):
        return all(p.contains(u) for p in self.parts)

    def project(self, u, margin):
        for p in self.parts:
            u = p.project(u, margin)
        return u


def as_domain(domain) -> Domain:
    if isinstance(domain, Domain):
        return domain
    if callable(domain):
        return Predicate(domain)
    raise TypeError(f"cannot interpret {domain!r} as a domain")


# ---------------------------------------------------------------------------
# Integration schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegrationScheme:
    """Nodes and strictly positive weights approximating an integral
    against a reference measure.

    ``kind`` is one of ``finite_sum``, ``gauss_legendre``, ``simplex_grid``
    or ``monte_carlo``.  ``params`` records how the scheme was built so it can
    be serialized and rebuilt.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    tolerance: float = 1e-10
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights must have equal length")
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise ValueError("weights must be strictly positive and finite")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.shape[0]

    # constructors -------------------------------------------------------
    @classmethod
    def finite_sum(cls, points, weights=None, tolerance=1e-12, **params):
        pts = np.asarray(points, dtype=float)
        w = np.ones(pts.shape[0]) if weights is None else np.asarray(weights, float)
        return cls("finite_sum", pts, w, tolerance, dict(params))

    @classmethod
    def gauss_legendre(cls, a: float, b: float, n: int = 256, tolerance=1e-10):
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError("Gauss-Legendre needs a finite interval a < b")
        x, w = np.polynomial.legendre.leggauss(int(n))
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        return cls(
            "gauss_legendre", mid + half * x, half * w, tolerance,
            {"a": float(a), "b": float(b), "n": int(n)},
        )

    @classmethod
    def tangent_legendre(cls, center: float, scale: float, n: int = 256,
                         tolerance=1e-10):
        """Gauss-Legendre on (-pi/2, pi/2) pushed to the real line by
        x = center + scale * tan(t).  Suited to polynomial tails."""
        t, w = np.polynomial.legendre.leggauss(int(n))
        t = 0.5 * np.pi * t
        w = 0.5 * np.pi * w
        x = center + scale * np.tan(t)
        jac = scale / np.cos(t) ** 2
        return cls(
            "finite_sum", x, w * jac, tolerance,
            {"transform": "tangent", "center": float(center),
             "scale": float(scale), "n": int(n)},
        )

    @classmethod
    def sine_legendre(cls, center: float, radius: float, n: int = 256,
                      tolerance=1e-10):
        """Nodes on (center - radius, center + radius) through
        x = center + radius * sin(t); softens algebraic endpoint behaviour."""
        t, w = np.polynomial.legendre.leggauss(int(n))
        t = 0.5 * np.pi * t
        w = 0.5 * np.pi * w
        x = center + radius * np.sin(t)
        return cls(
            "finite_sum", x, w * radius * np.cos(t), tolerance,
            {"transform": "sine", "center": float(center),
             "radius": float(radius), "n": int(n)},
        )

    @classmethod
    def simplex_grid(cls, dim: int, m: int = 16, tolerance=1e-8):
        """Collapsed (Duffy) tensor Gauss-Legendre grid on the open simplex
        {u_i > 0, sum u < 1} in ``dim`` reduced coordinates."""
        x, w = np.polynomial.legendre.leggauss(int(m))
        x, w = 0.5 * (x + 1.0), 0.5 * w
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        wgrids = np.meshgrid(*([w] * dim), indexing="ij")
        s = np.stack([g.ravel() for g in grids], axis=1)
        wt = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        pts = np.empty_like(s)
        rest = np.ones(s.shape[0])
        for i in range(dim):
            pts[:, i] = rest * s[:, i]
            wt = wt * rest
            rest = rest * (1.0 - s[:, i])
        return cls("simplex_grid", pts, wt, tolerance, {"dim": int(dim), "m": int(m)})

    @classmethod
    def monte_carlo(cls, lower, upper, n: int = 100_000, seed: int = 0,
                    tolerance=1e-2):
        """Uniform Monte Carlo on a finite box; weight = volume / n."""
        lo = np.atleast_1d(np.asarray(lower, float))
        hi = np.atleast_1d(np.asarray(upper, float))
        rng = np.random.default_rng(seed)
        pts = lo + (hi - lo) * rng.random((int(n), lo.size))
        vol = float(np.prod(hi - lo))
        return cls(
            "monte_carlo", pts if lo.size > 1 else pts[:, 0],
            np.full(int(n), vol / n), tolerance,
            {"lower": lo.tolist(), "upper": hi.tolist(), "n": int(n), "seed": int(seed)},
        )

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "tolerance": self.tolerance, **self.params}


def integrate(g: Callable[[np.ndarray], np.ndarray], scheme: IntegrationScheme):
    """Weighted sum of g over the scheme nodes.

    ``g`` receives the whole node array and must return one value per node
    (or one row per node for vector integrands).
    """
    vals = np.asarray(g(scheme.points), dtype=float)
    if vals.shape[0] != len(scheme):
        raise ValueError("integrand must return one value per node")
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals.reshape(len(scheme), -1)).any(1))[0])
        raise NonFiniteIntegrand(f"integrand is not finite at node {bad}")
    return scheme.weights @ vals


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def _steps(u: np.ndarray, h: float | None, base: float) -> np.ndarray:
    if h is not None:
        return np.full(u.shape, float(h))
    return base * (1.0 + np.abs(u))


def _value_fn(f):
    return f.value if hasattr(f, "value") else f


def _check_stencil(domain, pts):
    if domain is None:
        return
    for p in pts:
        if not domain.contains(p):
            raise DomainViolation("finite-difference stencil leaves the domain")


def fd_gradient(f, u, h: float | None = None, domain: Domain | None = None):
    """Central-difference gradient of ``f`` (a callable or a Potential)."""
    fv = _value_fn(f)
    if domain is None:
        domain = getattr(f, "domain", None)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    hs = _steps(u, h, FD_STEP)
    g = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = hs[i]
        _check_stencil(domain, (u + e, u - e))
        g[i] = (fv(u + e) - fv(u - e)) / (2.0 * hs[i])
    return g


def fd_jacobian(fn, u, h: float | None = None, domain: Domain | None = None):
    """Central-difference Jacobian of a vector map."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    hs = _steps(u, h, FD_STEP)
    cols = []
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = hs[i]
        _check_stencil(domain, (u + e, u - e))
        cols.append((np.atleast_1d(fn(u + e)) - np.atleast_1d(fn(u - e))) / (2 * hs[i]))
    return np.stack(cols, axis=1)


def fd_hessian(f, u, h: float | None = None, domain: Domain | None = None):
    """Symmetrized central-difference Hessian.

    If ``f`` exposes an analytic gradient, the Hessian is the Jacobian of that
    gradient (step eps^(1/3)); otherwise second differences of values are used
    with the larger step eps^(1/4).
    """
    if domain is None:
        domain = getattr(f, "domain", None)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    grad = getattr(f, "grad", None)
    if grad is not None:
        H = fd_jacobian(grad, u, h, domain)
        return 0.5 * (H + H.T)
    fv = _value_fn(f)
    hs = _steps(u, h, FD_STEP_2ND)
    n = u.size
    H = np.empty((n, n))
    f0 = fv(u)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        _check_stencil(domain, (u + ei, u - ei))
        H[i, i] = (fv(u + ei) - 2 * f0 + fv(u - ei)) / hs[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            pts = (u + ei + ej, u + ei - ej, u - ei + ej, u - ei - ej)
            _check_stencil(domain, pts)
            v = (fv(pts[0]) - fv(pts[1]) - fv(pts[2]) + fv(pts[3])) / (4 * hs[i] * hs[j])
            H[i, j] = H[j, i] = v
    return H


# ---------------------------------------------------------------------------
# Maximization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-9
    step_shrink_factor: float = 0.5
    domain_margin: float = 1e-12
    armijo: float = 1e-4
    value_cap: float = 1e12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be > 0")
        if not 0 < self.step_shrink_factor < 1:
            raise ValueError("step_shrink_factor must lie in (0, 1)")
        if not self.domain_margin > 0:
            raise ValueError("domain_margin must be > 0")


@dataclass(frozen=True)
class MaximizeResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    gradient_norm: float

    def __iter__(self):
        # allows ``argmax, value = maximize(...)``
        yield self.x
        yield self.value


def maximize(objective, gradient, domain, start, cfg: OptimizerConfig | None = None):
    """Projected gradient ascent with Armijo backtracking.

    Trial steps come from a Barzilai-Borwein estimate and are shrunk until the
    Armijo condition holds inside the domain.  When value differences fall
    below rounding level, a step is still accepted if it reduces the gradient
    norm, which lets the iteration resolve the stationary point to the
    accuracy of the gradient rather than of the objective.
    """
    cfg = cfg or OptimizerConfig()
    domain = as_domain(domain)
    x = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    if not domain.contains(x):
        raise StartOutsideDomain("start point is not inside the domain")
    fx = float(objective(x))
    if not np.isfinite(fx):
        raise StartOutsideDomain("objective is not finite at the start point")
    g = np.atleast_1d(np.asarray(gradient(x), dtype=float))
    step = 1.0 / max(1.0, float(np.linalg.norm(g)))
    margin = cfg.domain_margin

    def proj_grad_norm(x, g):
        return float(np.linalg.norm(domain.project(x + g, margin) - x))

    it = 0
    pg = proj_grad_norm(x, g)
    while it < cfg.max_iterations:
        if pg <= cfg.gradient_tolerance:
            return MaximizeResult(x, fx, True, it, pg)
        it += 1
        t = step
        accepted = False
        gnorm = float(np.linalg.norm(g))
        while t * gnorm > EPS * (1.0 + float(np.linalg.norm(x))):
            xn = domain.project(x + t * g, margin)
            if domain.contains(xn) and not np.array_equal(xn, x):
                fn = float(objective(xn))
                if fn == math.inf or fn > cfg.value_cap:
                    raise Unbounded("objective exceeds the configured cap")
                if np.isfinite(fn):
                    d = xn - x
                    gd = float(g @ d)
                    if fn >= fx + cfg.armijo * gd:
                        accepted = True
                    elif abs(fn - fx) <= 64 * EPS * max(1.0, abs(fx)):
                        gn_try = np.atleast_1d(gradient(xn))
                        if proj_grad_norm(xn, gn_try) < pg:
                            accepted = True
                    if accepted:
                        break
            t *= cfg.step_shrink_factor
        if not accepted:
            if pg > math.sqrt(cfg.gradient_tolerance):
                raise NoAscentDirection(
                    f"backtracking underflowed at iteration {it} (gradient norm {pg:.3e})"
                )
            return MaximizeResult(x, fx, False, it, pg)
        gn = np.atleast_1d(np.asarray(gradient(xn), dtype=float))
        s, y = xn - x, gn - g
        sy = float(s @ y)
        if sy < 0:
            step = float(s @ s) / -sy
        else:
            step = 2.0 * t
        step = min(max(step, 1e-12), 1e12)
        x, fx, g = xn, fn, gn
        pg = proj_grad_norm(x, g)
    return MaximizeResult(x, fx, pg <= cfg.gradient_tolerance, it, pg)


# ---------------------------------------------------------------------------
# Miscellaneous helpers
# ---------------------------------------------------------------------------


def halton_grid(lower, upper, n: int, domain: Domain | None = None) -> np.ndarray:
    """Deterministic low-discrepancy points in a box, filtered by ``domain``."""
    lo = np.atleast_1d(np.asarray(lower, float))
    hi = np.atleast_1d(np.asarray(upper, float))
    sampler = qmc.Halton(d=lo.size, scramble=False)
    sampler.fast_forward(1)  # skip the origin corner
    pts = qmc.scale(sampler.random(int(n)), lo, hi)
    if domain is not None:
        pts = np.array([p for p in pts if domain.contains(p)]).reshape(-1, lo.size)
    return pts


def stable_sum(values) -> float:
    """Compensated summation (order independent to rounding)."""
    return math.fsum(np.asarray(values, dtype=float).ravel())
