"""alpha-mixtures, lambda-mixtures, their dual potentials and the embedding
of alpha-mixtures into lambda-exponential families."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .divergences import DensityFunction, DiscreteDensity, alpha_divergence
from .errors import DomainViolation, IntegralDiverged, SupportConditionViolated
from .lambda_core import Potential, as_lambda
from .numerics import IntegrationScheme, OpenSimplex

Q_ONE_TOL = 1e-12


def _simplex_weights(w, n: int, name: str = "weights") -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != n:
        raise DomainViolation(f"{name} must have {n} entries, got {w.size}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainViolation(f"{name} must lie in the closed simplex")
    return w


@dataclass(frozen=True)
class ComponentDensity(DiscreteDensity):
    """Discrete mixture component that may vanish on some states (point masses)."""

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainViolation("component probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12 * p.size:
            raise DomainViolation(f"probabilities sum to {p.sum():.15g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class MixtureSpec:
    """d+1 component densities sharing one reference scheme, plus default
    mixture weights (uniform when omitted)."""

    components: tuple
    weights: np.ndarray | None = None
    _nodes: np.ndarray = field(init=False, repr=False)
    _w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise DomainViolation("a mixture needs at least one component")
        discrete = [isinstance(c, DiscreteDensity) for c in comps]
        if any(discrete) and not all(discrete):
            raise DomainViolation("cannot mix discrete and continuous components")
        if all(discrete):
            P = np.vstack([c.probs for c in comps])
            wn = np.ones(P.shape[1])
            if len(comps) <= P.shape[1] and np.linalg.matrix_rank(P) < len(comps):
                raise DomainViolation("components are not affinely independent")
        else:
            sch = comps[0].scheme
            for c in comps[1:]:
                if c.scheme is not sch and not (
                        np.array_equal(c.scheme.points, sch.points)
                        and np.array_equal(c.scheme.weights, sch.weights)):
                    raise DomainViolation("components must share one integration scheme")
            P = np.vstack([c(sch.points) for c in comps])
            wn = np.asarray(sch.weights)
        w = (np.full(len(comps), 1.0 / len(comps)) if self.weights is None
             else _simplex_weights(self.weights, len(comps)))
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_nodes", P)
        object.__setattr__(self, "_w", wn)

    @classmethod
    def discrete(cls, probs, weights=None) -> "MixtureSpec":
        return cls(tuple(ComponentDensity.normalized(p) for p in np.atleast_2d(probs)), weights)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.components[0], DiscreteDensity)

    @property
    def scheme(self) -> IntegrationScheme | None:
        return None if self.is_discrete else self.components[0].scheme

    def node_values(self) -> tuple[np.ndarray, np.ndarray]:
        """(component values at nodes, node weights)."""
        return self._nodes, self._w

    def escort_nodes(self, q: float) -> np.ndarray:
        """Escort(q, p_i) evaluated at the nodes, one row per component."""
        P, w = self._nodes, self._w
        with np.errstate(divide="ignore"):
            L = q * np.log(P)
        logZ = logsumexp(L, b=w, axis=1)
        if not np.all(np.isfinite(logZ)):
            raise IntegralDiverged("escort normalization of a component diverged")
        return np.exp(L - logZ[:, None])

    def escort_normalizers(self, q: float) -> np.ndarray:
        """Z_i = int p_i^q dnu."""
        with np.errstate(divide="ignore"):
            return np.exp(logsumexp(q * np.log(self._nodes), b=self._w, axis=1))


def _wrap(spec: MixtureSpec, fn_nodes: np.ndarray, pointwise):
    """Turn node values (already normalized) into a density object."""
    if spec.is_discrete:
        return DiscreteDensity.normalized(fn_nodes)
    return DensityFunction(pointwise, spec.scheme, spec.components[0].support)


# ---------------------------------------------------------------------------
# alpha-mixture
# ---------------------------------------------------------------------------


def _alpha_unnormalized(alpha: float, vals: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(sum_i w_i p_i^r)^(1/r), r = (1 - alpha)/2; the geometric mean at r = 0."""
    r = 0.5 * (1.0 - alpha)
    with np.errstate(divide="ignore"):
        logv = np.log(vals)
    m = w > 0
    if abs(r) < Q_ONE_TOL:
        return np.exp(w[m] @ logv[m])
    lw = np.log(w[m])[:, None] + r * logv[m]
    return np.exp(logsumexp(lw, axis=0) / r)


def alpha_mixture(alpha: float, spec: MixtureSpec, w=None):
    """Normalized alpha-mean c(w) (sum w_i p_i^((1-alpha)/2))^(2/(1-alpha)).

    alpha = -1 is the linear mixture; alpha -> 1 the geometric mixture."""
    w = spec.weights if w is None else _simplex_weights(w, spec.n)
    P, nw = spec.node_values()
    un = _alpha_unnormalized(alpha, P, w)
    total = float(nw @ un)
    if not np.isfinite(total) or total <= 0:
        raise IntegralDiverged("alpha-mixture normalization is not finite")
    comps = spec.components

    def ev(x):
        vals = np.vstack([c(x) for c in comps])
        return _alpha_unnormalized(alpha, vals, w) / total

    return _wrap(spec, un / total, ev)


# ---------------------------------------------------------------------------
# lambda-mixture
# ---------------------------------------------------------------------------


def _eta_full(spec: MixtureSpec, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.size == spec.n - 1:
        eta = np.concatenate([[1.0 - eta.sum()], eta])
    return _simplex_weights(eta, spec.n, "eta")


def lambda_mixture(lam, spec: MixtureSpec, eta=None):
    """escort(1/q, sum_i eta_i escort(q, p_i)); eta in full or barred coordinates."""
    lp = as_lambda(lam)
    if lp.lam >= 1:
        raise DomainViolation("lambda-mixtures need lambda < 1")
    q = lp.q
    eta = spec.weights if eta is None else _eta_full(spec, eta)
    E = spec.escort_nodes(q)
    m = eta @ E
    _, nw = spec.node_values()
    Z = float(nw @ m ** (1.0 / q))
    if not np.isfinite(Z) or Z <= 0:
        raise IntegralDiverged("lambda-mixture normalization is not finite")
    comps = spec.components
    logZi = np.log(spec.escort_normalizers(q))

    def ev(x):
        vals = np.vstack([c(x) for c in comps])
        with np.errstate(divide="ignore"):
            ex = np.exp(q * np.log(vals) - logZi[:, None])
        return (eta @ ex) ** (1.0 / q) / Z

    return _wrap(spec, m ** (1.0 / q) / Z, ev)


def _mixture_parts(lam, spec: MixtureSpec, eta):
    lp = as_lambda(lam)
    q = lp.q
    E = spec.escort_nodes(q)
    m = _eta_full(spec, eta) @ E
    _, nw = spec.node_values()
    return lp, q, E, m, nw


def mixture_dual_potential(lam, spec: MixtureSpec, eta, form: str = "z") -> float:
    """psi(eta) = -Renyi entropy of order q of the lambda-mixture p_eta.

    ``form="z"`` uses (q/lambda) log Z(eta); ``form="entropy"`` evaluates the
    Renyi entropy of the constructed density.  The classical limit is the
    negative Shannon entropy of the linear mixture."""
    from .divergences import renyi_entropy

    lp, q, E, m, nw = _mixture_parts(lam, spec, eta)
    if form == "entropy":
        return -renyi_entropy(q, lambda_mixture(lp, spec, eta))
    if form != "z":
        raise DomainViolation(f"unknown form {form!r}")
    if lp.classical:
        mm = m > 0
        return float(nw[mm] @ (m[mm] * np.log(m[mm])))
    with np.errstate(divide="ignore"):
        logZ = logsumexp(np.log(m) / q, b=nw)
    return float(q / lp.lam * logZ)


def mixture_potential(lam, spec: MixtureSpec) -> Potential:
    """psi as a Potential on barred coordinates (eta_1..eta_d) with the
    analytic gradient (1/(lambda Z)) int m^(1/q - 1) (escort_i - escort_0)."""
    lp = as_lambda(lam)
    q = lp.q
    E = spec.escort_nodes(q)
    _, nw = spec.node_values()
    D = E[1:] - E[0]
    d = spec.n - 1

    def m_of(e):
        return (1.0 - e.sum()) * E[0] + e @ E[1:]

    def fn(e):
        return mixture_dual_potential(lp, spec, e)

    def grad(e):
        m = m_of(e)
        mm = m > 0
        if lp.classical:
            return (D[:, mm] * np.log(m[mm])) @ nw[mm]
        Z = nw[mm] @ m[mm] ** (1.0 / q)
        return (D[:, mm] * m[mm] ** (1.0 / q - 1.0)) @ nw[mm] / (lp.lam * Z)

    def hess(e):
        m = m_of(e)
        mm = m > 0
        Dm, wm = D[:, mm], nw[mm]
        if lp.classical:
            return (Dm / m[mm]) @ (Dm * wm).T
        Z = wm @ m[mm] ** (1.0 / q)
        g = (Dm * m[mm] ** (1.0 / q - 1.0)) @ wm / (lp.lam * Z)
        H1 = (Dm * (m[mm] ** (1.0 / q - 2.0) * wm)) @ Dm.T * (1.0 / q - 1.0) / (lp.lam * Z)
        return H1 - (lp.lam / q) * np.outer(g, g)

    return Potential(fn, OpenSimplex(d), grad, hess, None,
                     tuple(spec.weights[1:]), None, "lambda-mixture-dual")


def mixture_primal_variable(lam, spec: MixtureSpec, eta_bar) -> np.ndarray:
    """vartheta_i = (1/lambda)[int p_eta^lambda escort_i / int p_eta^lambda escort_0 - 1]."""
    lp = as_lambda(lam)
    if lp.classical:
        raise DomainViolation("the primal variable formula needs lambda != 0")
    p = lambda_mixture(lp, spec, eta_bar)
    E = spec.escort_nodes(lp.q)
    _, nw = spec.node_values()
    vals = p.probs if isinstance(p, DiscreteDensity) else p(spec.scheme.points)
    with np.errstate(divide="ignore"):
        pl = np.where(vals > 0, vals ** lp.lam, 0.0)
    I = E @ (pl * nw)
    return (I[1:] / I[0] - 1.0) / lp.lam


@dataclass(frozen=True)
class MixtureReparameterization:
    """w <-> eta maps linking the lambda-mixture with the alpha-mixture of
    the same components, alpha = 2 lambda - 1."""

    Z: np.ndarray
    alpha: float

    def w_from_eta(self, eta) -> np.ndarray:
        r = np.asarray(eta, float) / self.Z
        return r / r.sum()

    def eta_from_w(self, w) -> np.ndarray:
        r = np.asarray(w, float) * self.Z
        return r / r.sum()


def mixture_reparameterization(lam, spec: MixtureSpec) -> MixtureReparameterization:
    """Z_i = int p_i^q dnu; w_i proportional to eta_i / Z_i."""
    lp = as_lambda(lam)
    Z = spec.escort_normalizers(lp.q)
    if not np.all(np.isfinite(Z)):
        raise IntegralDiverged("int p_i^q diverged")
    return MixtureReparameterization(Z, 2.0 * lp.lam - 1.0)


# ---------------------------------------------------------------------------
# Embedding alpha-mixtures into a lambda-exponential family
# ---------------------------------------------------------------------------


def embed_alpha_mixture(fam, member_params: Sequence, w) -> np.ndarray:
    """Natural parameter of the alpha-mixture (alpha = 1 - 2 lambda) of family
    members: the a_i-reweighted convex combination of the vartheta^(i) with
    a_i = exp(-lambda phi(vartheta^(i)))."""
    if not fam.support_condition:
        raise SupportConditionViolated(
            "the family support depends on the parameter; alpha-mixtures leave the family")
    V = np.vstack([np.atleast_1d(np.asarray(t, float)) for t in member_params])
    w = _simplex_weights(w, V.shape[0])
    l = fam.lam.lam
    loga = np.array([-l * fam.potential(t) for t in V])
    with np.errstate(divide="ignore"):
        lw = np.log(w) + loga
    c = np.exp(lw - logsumexp(lw))
    return c @ V


@dataclass(frozen=True)
class InterpolationPath:
    t: np.ndarray
    s: np.ndarray
    vartheta: np.ndarray
    residual: float

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.s) >= -1e-15))


def interpolation_path(fam, member_params, w0, w1, steps: int = 21) -> InterpolationPath:
    """vartheta(t) for w(t) = (1-t) w0 + t w1, with the time change s(t) found
    by projecting onto the chord vartheta(0) -> vartheta(1)."""
    w0 = np.asarray(w0, float)
    w1 = np.asarray(w1, float)
    ts = np.linspace(0.0, 1.0, int(steps))
    V = np.vstack([embed_alpha_mixture(fam, member_params, (1 - t) * w0 + t * w1) for t in ts])
    a, b = V[0], V[-1]
    chord = b - a
    nn = float(chord @ chord)
    if nn == 0:
        return InterpolationPath(ts, ts.copy(), V, float(np.max(np.abs(V - a))))
    s = (V - a) @ chord / nn
    resid = V - (a + np.outer(s, chord))
    return InterpolationPath(ts, s, V, float(np.max(np.linalg.norm(resid, axis=1))))


# ---------------------------------------------------------------------------
# Barycenter oracle and figure grids
# ---------------------------------------------------------------------------


def simplex_lattice(n: int, m: int) -> np.ndarray:
    """All points of the closed (n-1)-simplex with coordinates in {0, 1/m, ..., 1}."""
    pts = [c for c in itertools.product(range(m + 1), repeat=n - 1) if sum(c) <= m]
    arr = np.array(pts, dtype=float)
    return np.column_stack([m - arr.sum(axis=1), arr]) / m


@dataclass(frozen=True)
class BarycenterCheck:
    grid_argmin: np.ndarray
    mixture: np.ndarray
    discrepancy: float
    resolution: float


def alpha_barycenter_check(alpha: float, spec: MixtureSpec, w=None,
                           resolution: float = 0.005) -> BarycenterCheck:
    """Brute-force argmin of sum_i w_i D_alpha[p_i : p] over an open-simplex
    lattice, compared with alpha_mixture (discrete specs of <= 4 states)."""
    if not spec.is_discrete:
        raise DomainViolation("the barycenter oracle needs a discrete spec")
    P, _ = spec.node_values()
    k = P.shape[1]
    if k > 4:
        raise DomainViolation("grid search is limited to at most 4 states")
    w = spec.weights if w is None else _simplex_weights(w, spec.n)
    m = int(round(1.0 / resolution))
    G = simplex_lattice(k, m)
    G = G[np.all(G > 0, axis=1)]
    r = 0.5 * (1.0 - alpha)
    if abs(r) < Q_ONE_TOL or abs(r - 1) < Q_ONE_TOL:
        objs = np.array([sum(wi * alpha_divergence(alpha, DiscreteDensity(pi), DiscreteDensity(g))
                             for wi, pi in zip(w, P)) for g in G])
    else:
        # D_alpha[p_i : g] = 4/(1-alpha^2) (1 - sum p_i^r g^(1-r)), vectorized over G
        inner = (P ** r) @ (G ** (1.0 - r)).T
        objs = 4.0 / (1.0 - alpha ** 2) * (w @ (1.0 - inner))
    best = G[int(np.argmin(objs))]
    mix = alpha_mixture(alpha, spec, w).probs
    return BarycenterCheck(best, mix, float(np.max(np.abs(best - mix))), 1.0 / m)


def mixture_grid(lam, spec: MixtureSpec, m: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """lambda-mixture densities over the closed-simplex eta-lattice of step 1/m."""
    etas = simplex_lattice(spec.n, m)
    dens = np.vstack([_lambda_mixture_closed(lam, spec, e) for e in etas])
    return etas, dens


def _lambda_mixture_closed(lam, spec, eta):
    lp = as_lambda(lam)
    E = spec.escort_nodes(lp.q)
    mvals = np.asarray(eta, float) @ E
    v = mvals ** (1.0 / lp.q)
    return v / v.sum()


EXAMPLE_MIXTURE_COMPONENTS = np.array([
    [0.8, 0.1, 0.1],
    [0.02, 0.9, 0.08],
    [0.35, 0.2, 0.45],
])


__all__ = [
    "MixtureSpec", "ComponentDensity", "alpha_mixture", "lambda_mixture", "mixture_dual_potential",
    "mixture_potential", "mixture_primal_variable", "mixture_reparameterization",
    "MixtureReparameterization", "embed_alpha_mixture", "interpolation_path",
    "InterpolationPath", "alpha_barycenter_check", "BarycenterCheck",
    "simplex_lattice", "mixture_grid", "EXAMPLE_MIXTURE_COMPONENTS",
]
