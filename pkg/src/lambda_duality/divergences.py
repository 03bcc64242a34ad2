"""Divergences and entropies: lambda-logarithmic, Bregman, Renyi, Tsallis,
Shannon, KL, alpha-divergence and the escort transformation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import DomainViolation, IntegralDiverged
from .lambda_core import Potential, as_lambda
from .numerics import IntegrationScheme

DENSITY_FLOOR = 1e-300
Q_ONE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDensity:
    """Strictly positive probability vector (counting reference measure)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise DomainViolation("probabilities must be finite and strictly positive")
        if abs(p.sum() - 1.0) > 1e-12 * p.size:
            raise DomainViolation(f"probabilities sum to {p.sum():.15g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, w) -> "DiscreteDensity":
        w = np.asarray(w, dtype=float)
        return cls(w / w.sum())

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True)
class DensityFunction:
    """Density with respect to a reference measure realized by ``scheme``.

    ``eval`` is vectorized over an array of points.  ``support`` is a
    vectorized membership test (defaults to everywhere).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    scheme: IntegrationScheme
    support: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x):
        return np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)

    def on(self, scheme: IntegrationScheme) -> "DensityFunction":
        return DensityFunction(self.eval, scheme, self.support)


Density = DiscreteDensity | DensityFunction


# ---------------------------------------------------------------------------
# Potential-based divergences
# ---------------------------------------------------------------------------


def bregman(f: Potential, u, u_prime) -> float:
    """f(u) - f(u') - grad f(u').(u - u')."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    up = np.atleast_1d(np.asarray(u_prime, dtype=float))
    return f.value(u) - f.value(up) - float(f.gradient(up) @ (u - up))


def log_divergence(lam, f: Potential, u, u_prime) -> float:
    """lambda-logarithmic divergence
    f(u) - f(u') - (1/lambda) log(1 + lambda grad f(u').(u - u')).

    Returns +inf when lambda > 0 and the log argument is <= 0.  In the
    classical limit this is the Bregman divergence.
    """
    lam = as_lambda(lam)
    if lam.classical:
        return bregman(f, u, u_prime)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    up = np.atleast_1d(np.asarray(u_prime, dtype=float))
    t = float(f.gradient(up) @ (u - up))
    s = 1.0 + lam.lam * t
    if s <= 0:
        # log s = -inf; the sign of 1/lambda decides the extended value
        return math.inf if lam.lam > 0 else -math.inf
    return f.value(u) - f.value(up) - math.log1p(lam.lam * t) / lam.lam


# ---------------------------------------------------------------------------
# Density evaluation helpers
# ---------------------------------------------------------------------------


def _weights_values(p: Density, scheme: IntegrationScheme | None = None):
    if isinstance(p, DiscreteDensity):
        return np.ones(p.probs.size), p.probs
    sch = scheme or p.scheme
    return sch.weights, p(sch.points)


def _pair(p: Density, pp: Density, scheme: IntegrationScheme | None):
    if isinstance(p, DiscreteDensity) and isinstance(pp, DiscreteDensity):
        if p.probs.size != pp.probs.size:
            raise DomainViolation("densities live on state spaces of different sizes")
        return np.ones(p.probs.size), p.probs, pp.probs
    if isinstance(p, DiscreteDensity) or isinstance(pp, DiscreteDensity):
        raise DomainViolation("cannot mix discrete and continuous densities")
    sch = scheme or p.scheme
    return sch.weights, p(sch.points), pp(sch.points)


def _log(x):
    return np.log(np.maximum(x, DENSITY_FLOOR))


def _log_power_integral(w, vals, q: float) -> float:
    """log of sum w * vals^q, ignoring nodes where vals = 0 (q > 0)."""
    mask = vals > 0
    if not np.any(mask):
        raise IntegralDiverged("density vanishes on every node")
    out = logsumexp(q * np.log(vals[mask]), b=w[mask])
    if not np.isfinite(out):
        raise IntegralDiverged("power integral is not finite")
    return float(out)


def _is_one(q: float) -> bool:
    return abs(q - 1.0) < Q_ONE_TOL


# ---------------------------------------------------------------------------
# Entropies
# ---------------------------------------------------------------------------


def shannon_entropy(p: Density, scheme: IntegrationScheme | None = None) -> float:
    w, v = _weights_values(p, scheme)
    return -float(w @ (v * _log(v)))


def renyi_entropy(q: float, p: Density, scheme: IntegrationScheme | None = None) -> float:
    """(1/(1-q)) log int p^q; Shannon entropy at q = 1."""
    q = float(q)
    if q <= 0:
        raise DomainViolation("Renyi entropy needs q > 0")
    if _is_one(q):
        return shannon_entropy(p, scheme)
    w, v = _weights_values(p, scheme)
    return _log_power_integral(w, v, q) / (1.0 - q)


def tsallis_entropy(q: float, p: Density, scheme: IntegrationScheme | None = None) -> float:
    """(1/(q-1)) (1 - int p^q); Shannon entropy at q = 1."""
    q = float(q)
    if q <= 0:
        raise DomainViolation("Tsallis entropy needs q > 0")
    if _is_one(q):
        return shannon_entropy(p, scheme)
    w, v = _weights_values(p, scheme)
    return -math.expm1(_log_power_integral(w, v, q)) / (q - 1.0)


def tsallis_from_renyi(q: float, renyi: float) -> float:
    """Monotone bijection (1/(1-q)) (exp((1-q) H_renyi) - 1)."""
    if _is_one(q):
        return renyi
    return math.expm1((1.0 - q) * renyi) / (1.0 - q)


# ---------------------------------------------------------------------------
# Divergences between densities
# ---------------------------------------------------------------------------


def kl_divergence(p: Density, p_prime: Density,
                  scheme: IntegrationScheme | None = None) -> float:
    """int p log(p/p')."""
    w, a, b = _pair(p, p_prime, scheme)
    mask = a > 0
    return float(w[mask] @ (a[mask] * (_log(a[mask]) - _log(b[mask]))))


def renyi_log_integral(q: float, p: Density, p_prime: Density,
                       scheme: IntegrationScheme | None = None) -> float:
    """log int p^q p'^(1-q)."""
    w, a, b = _pair(p, p_prime, scheme)
    mask = a > 0
    if q < 1:
        mask &= b > 0
    if not np.any(mask):
        raise IntegralDiverged("densities have disjoint supports")
    out = logsumexp(q * _log(a[mask]) + (1.0 - q) * _log(b[mask]), b=w[mask])
    if not np.isfinite(out):
        raise IntegralDiverged("Renyi integral is not finite")
    return float(out)


def renyi_divergence(q: float, p: Density, p_prime: Density,
                     scheme: IntegrationScheme | None = None) -> float:
    """(1/(q-1)) log int p^q p'^(1-q); KL divergence at q = 1."""
    q = float(q)
    if q <= 0:
        raise DomainViolation("Renyi divergence needs q > 0")
    if _is_one(q):
        return kl_divergence(p, p_prime, scheme)
    return renyi_log_integral(q, p, p_prime, scheme) / (q - 1.0)


def alpha_divergence(alpha: float, p: Density, p_prime: Density,
                     scheme: IntegrationScheme | None = None) -> float:
    """(4/(1-alpha^2)) (1 - int p^((1-alpha)/2) p'^((1+alpha)/2)).

    The endpoints are filled in by continuity: alpha -> 1 gives KL(p'||p) and
    alpha -> -1 gives KL(p||p').
    """
    alpha = float(alpha)
    if abs(alpha - 1.0) < Q_ONE_TOL:
        return kl_divergence(p_prime, p, scheme)
    if abs(alpha + 1.0) < Q_ONE_TOL:
        return kl_divergence(p, p_prime, scheme)
    # int p^a p'^(1-a) with a = (1 - alpha)/2
    a = 0.5 * (1.0 - alpha)
    li = renyi_log_integral(a, p, p_prime, scheme) if a > 0 else \
        renyi_log_integral(1.0 - a, p_prime, p, scheme)
    return -4.0 / (1.0 - alpha ** 2) * math.expm1(li)


# ---------------------------------------------------------------------------
# Escort transformation
# ---------------------------------------------------------------------------


def escort(alpha: float, p: Density, scheme: IntegrationScheme | None = None) -> Density:
    """p^alpha / int p^alpha."""
    alpha = float(alpha)
    if alpha == 0:
        raise DomainViolation("escort exponent must be nonzero")
    if isinstance(p, DiscreteDensity):
        lw = alpha * np.log(p.probs)
        return DiscreteDensity(np.exp(lw - logsumexp(lw)))
    sch = scheme or p.scheme
    w, v = sch.weights, p(sch.points)
    if alpha < 0 and np.any(v <= 0):
        raise IntegralDiverged("negative escort exponent with zeros on the support")
    logZ = _log_power_integral(w, v, alpha)
    base = p.eval

    def ev(x):
        vals = base(x)
        out = np.zeros_like(vals, dtype=float)
        m = vals > 0
        out[m] = np.exp(alpha * np.log(vals[m]) - logZ)
        return out

    return DensityFunction(ev, sch, p.support)


def product_density(p: DiscreteDensity, r: DiscreteDensity) -> DiscreteDensity:
    """Joint law of independent draws from p and r."""
    return DiscreteDensity(np.outer(p.probs, r.probs).ravel())


__all__ = [
    "DiscreteDensity", "DensityFunction", "bregman", "log_divergence",
    "shannon_entropy", "renyi_entropy", "tsallis_entropy", "tsallis_from_renyi",
    "kl_divergence", "renyi_divergence", "renyi_log_integral", "alpha_divergence",
    "escort", "product_density",
]
