"""Estimation and entropy maximization: the likelihood/divergence
representation, maximum likelihood as a right barycenter, the dual variable
as a barycenter and the Renyi maximum-entropy property."""

from __future__ import annotations

import csv
import math
import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .divergences import DiscreteDensity, renyi_divergence, renyi_entropy
from .errors import (
    ConstraintViolated,
    DataFormatError,
    DomainViolation,
    SupportConditionViolated,
)
from .families import DirichletPerturbationFamily, FiniteFamily, SimplexFamily
from .lambda_core import LambdaParam, Potential, as_lambda, lambda_gradient
from .numerics import OptimizerConfig, maximize, stable_sum
from .potentials import (
    dirichlet_dual_potential,
    dirichlet_potential,
    quadratic,
    renyi_simplex_potential,
    simplex_potential,
)


# ---------------------------------------------------------------------------
# Families written in data coordinates y = F(x)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataFamily:
    """A lambda-exponential family with F(y) = y together with the conjugate
    pair (phi, psi).  ``psi_value`` evaluates psi on the closure of its domain
    (data may sit on the boundary, e.g. simplex vertices)."""

    name: str
    lam: LambdaParam
    phi: Potential
    psi: Potential
    psi_value: Callable[[np.ndarray], float]
    dim: int

    def log_density(self, vartheta, y) -> np.ndarray:
        """(1/lambda) log(1 + lambda vartheta.y) - phi(vartheta) with respect to the
        reference measure pushed to data coordinates."""
        t = np.atleast_1d(np.asarray(vartheta, float))
        Y = np.atleast_2d(np.asarray(y, float))
        s = Y @ t
        if self.lam.classical:
            return s - self.phi.value(t)
        base = 1.0 + self.lam.lam * s
        if np.any(base <= 0):
            raise SupportConditionViolated("1 + lambda vartheta.y <= 0 for some data point")
        return np.log(base) / self.lam.lam - self.phi.value(t)

    def log_divergence_psi(self, y, eta) -> np.ndarray:
        """L_{lambda, psi}[y : eta] for each row of y."""
        e = np.atleast_1d(np.asarray(eta, float))
        Y = np.atleast_2d(np.asarray(y, float))
        g = self.psi.gradient(e)
        psi_y = np.array([self.psi_value(r) for r in Y])
        d = (Y - e) @ g
        if self.lam.classical:
            return psi_y - self.psi.value(e) - d
        s = 1.0 + self.lam.lam * d
        out = np.full(len(Y), math.inf if self.lam.lam > 0 else -math.inf)
        m = s > 0
        out[m] = psi_y[m] - self.psi.value(e) - np.log(s[m]) / self.lam.lam
        return out

    def dual_parameter(self, vartheta) -> np.ndarray:
        return lambda_gradient(self.lam, self.phi, vartheta)


def simplex_data_family(lam, dim: int) -> DataFamily:
    """Finite simplex: y = F(x) is 0 for state 0 and e_x otherwise."""
    lp = as_lambda(lam)
    psi = renyi_simplex_potential(lp, dim)

    def psi_closed(y):
        p = np.concatenate([[1.0 - y.sum()], y])
        p = np.clip(p, 0.0, None)
        if lp.classical:
            m = p > 0
            return float(p[m] @ np.log(p[m]))
        return lp.q / lp.lam * math.log(float(np.sum(p ** (1.0 / lp.q))))

    return DataFamily("simplex", lp, simplex_potential(lp, dim), psi, psi_closed, dim)


def dirichlet_data_family(dim: int, sigma: float) -> DataFamily:
    """Dirichlet perturbation in F-coordinates y_i = q_i / q_0."""
    lp = as_lambda(-float(sigma))
    psi = dirichlet_dual_potential(lp, dim)
    return DataFamily("dirichlet-perturbation", lp, dirichlet_potential(lp, dim), psi,
                      psi.value, dim)


def gaussian_location_data_family(dim: int = 1) -> DataFamily:
    """Classical limit: N(theta, I) relative to N(0, I); phi = psi = |.|^2 / 2."""
    lp = LambdaParam.classical_limit()
    f = quadratic(dim)
    return DataFamily("gaussian-location", lp, f, f, f.value, dim)


def as_data_family(fam) -> DataFamily:
    if isinstance(fam, DataFamily):
        return fam
    if isinstance(fam, SimplexFamily):
        return simplex_data_family(fam.lam, fam.dim)
    if isinstance(fam, DirichletPerturbationFamily):
        return dirichlet_data_family(fam.dim, fam.sigma)
    if hasattr(fam, "support_condition") and not fam.support_condition:
        raise SupportConditionViolated(
            f"{fam.kind}: support depends on the parameter; no likelihood/divergence representation")
    raise DomainViolation(f"no data-coordinate representation for {getattr(fam, 'kind', fam)!r}")


# ---------------------------------------------------------------------------
# Likelihood as a divergence
# ---------------------------------------------------------------------------


def likelihood_divergence_repr_check(fam, vartheta, y_grid) -> float:
    """max over y of |log p(y; vartheta) + L_{lambda,psi}[y : eta] - psi(y)|."""
    df = as_data_family(fam)
    t = np.atleast_1d(np.asarray(vartheta, float))
    Y = np.atleast_2d(np.asarray(y_grid, float))
    eta = df.dual_parameter(t)
    res = df.log_density(t, Y) + df.log_divergence_psi(Y, eta) - np.array(
        [df.psi_value(r) for r in Y])
    return float(np.max(np.abs(res)))


def dirichlet_cost_form_check(fam: DirichletPerturbationFamily, p, q) -> float:
    """Spread of log f(q|p) + sum log q_i + c(p, q)/sigma over the rows of q.

    The Lebesgue density is proportional to exp(-c(p, q)/sigma)/prod q_i, so
    the spread must vanish."""
    from .families import dirichlet_cost

    q = np.atleast_2d(np.asarray(q, float))
    v = (fam.log_lebesgue_density(p, q) + np.log(q).sum(axis=1)
         + dirichlet_cost(p, q) / fam.sigma)
    return float(v.max() - v.min())


# ---------------------------------------------------------------------------
# MLE as right barycenter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    eta_hat: np.ndarray
    vartheta_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    method: str
    out_of_domain: int = 0


def count_out_of_domain(df: DataFamily, Y: np.ndarray) -> int:
    """Rows outside the closure of the domain of psi.  The divergence
    representation of the likelihood only holds for the remaining rows, so the
    count is reported rather than enforced.  Closure membership is tested by a
    tiny step towards the interior start point (the domains are convex)."""
    centre = np.asarray(df.psi.start, float)
    dom = df.psi.domain
    return int(sum(not dom.contains(y + 1e-9 * (centre - y)) for y in Y))


def _data_start(df: DataFamily, Y: np.ndarray, domain) -> np.ndarray:
    m = Y.mean(axis=0)
    if domain.contains(m):
        return m
    centre = np.asarray(df.psi.start, float)
    for s in np.linspace(0.9, 0.0, 10):
        x = s * m + (1 - s) * centre
        if domain.contains(x):
            return x
    return centre


def barycenter_objective(df: DataFamily, Y: np.ndarray):
    """(value, gradient) of eta -> mean_i L_{lambda,psi}[y_i : eta] up to the
    eta-independent mean of psi(y_i)."""
    l = df.lam.lam

    def parts(e):
        g = df.psi.gradient(e)
        H = df.psi.hessian(e)
        D = Y - e
        return g, H, D

    def value(e):
        g, _, D = parts(e)
        if df.lam.classical:
            return -df.psi.value(e) - float(np.mean(D @ g))
        s = 1.0 + l * (D @ g)
        if np.any(s <= 0):
            return math.inf
        return -df.psi.value(e) - stable_sum(np.log(s)) / (l * len(Y))

    def grad(e):
        g, H, D = parts(e)
        if df.lam.classical:
            return -g - np.mean(D @ H - g, axis=0)
        s = 1.0 + l * (D @ g)
        return -g - np.mean((D @ H - g) / s[:, None], axis=0)

    return value, grad


def _mle_barycenter_route(df, Y, cfg):
    value, grad = barycenter_objective(df, Y)
    dom = df.psi.domain
    res = maximize(lambda e: -value(e), lambda e: -grad(e), dom, _data_start(df, Y, dom), cfg)
    eta = res.x
    vt = lambda_gradient(df.lam, df.psi, eta)
    obj = float(np.mean(df.log_divergence_psi(Y, eta)))
    return FitResult(eta, vt, obj, res.iterations, res.converged, "barycenter")


def _mle_likelihood_route(df, Y, cfg):
    l = df.lam.lam
    n = len(Y)

    def loglik(t):
        s = Y @ t
        if df.lam.classical:
            return float(np.mean(s)) - df.phi.value(t)
        base = 1.0 + l * s
        if np.any(base <= 0):
            return -math.inf
        return stable_sum(np.log(base)) / (l * n) - df.phi.value(t)

    def grad(t):
        if df.lam.classical:
            return Y.mean(axis=0) - df.phi.gradient(t)
        base = 1.0 + l * (Y @ t)
        return np.mean(Y / base[:, None], axis=0) - df.phi.gradient(t)

    dom = df.phi.domain
    if not df.lam.classical and l < 0:
        from .numerics import Predicate

        dom = dom & Predicate(lambda t: bool(np.all(1.0 + l * (Y @ t) > 0)), df.dim, "support")
    start = np.asarray(df.phi.start, float)
    res = maximize(loglik, grad, dom, start, cfg)
    eta = df.dual_parameter(res.x)
    return FitResult(eta, res.x, -res.value, res.iterations, res.converged, "likelihood")


def mle_barycenter(fam, data, method: str = "barycenter",
                   cfg: OptimizerConfig | None = None) -> FitResult:
    """Fit by minimizing mean_i L_{lambda,psi}[y_i : eta] over eta
    ("barycenter") or by maximizing the likelihood over vartheta
    ("likelihood").  ``data`` are rows y_i = F(x_i)."""
    df = as_data_family(fam)
    Y = np.atleast_2d(np.asarray(data, float))
    if Y.shape[1] != df.dim:
        raise DataFormatError(f"data have {Y.shape[1]} columns, expected {df.dim}")
    cfg = cfg or OptimizerConfig(max_iterations=20000, gradient_tolerance=1e-11)
    routes = {"barycenter": _mle_barycenter_route, "likelihood": _mle_likelihood_route}
    if method not in routes:
        raise DomainViolation(f"unknown method {method!r}")
    r = routes[method](df, Y, cfg)
    return dataclasses.replace(r, out_of_domain=count_out_of_domain(df, Y))


def simplex_states_to_data(states, dim: int) -> np.ndarray:
    """Map state labels 0..dim to rows of F (0 for state 0, e_i otherwise)."""
    s = np.asarray(states, dtype=int)
    if np.any(s < 0) or np.any(s > dim):
        raise DataFormatError("state labels out of range")
    return np.vstack([np.zeros(dim), np.eye(dim)])[s]


def dirichlet_standard_error(fam: DirichletPerturbationFamily, vartheta, n: int) -> np.ndarray:
    """Asymptotic standard errors of eta-hat (= p_i/p_0 estimates) from the
    inverse Fisher information, pushed through eta = 1/(lambda vartheta)."""
    from .geometry import metric_matrix

    t = np.atleast_1d(np.asarray(vartheta, float))
    fisher = metric_matrix(fam.lam, fam.potential_function(), t) / fam.q
    J = np.diag(-1.0 / (fam.lam.lam * t ** 2))
    cov = J @ np.linalg.inv(fisher) @ J.T / n
    return np.sqrt(np.diag(cov))


# ---------------------------------------------------------------------------
# Dual variable as barycenter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualBarycenterResult:
    argmin: np.ndarray
    eta: np.ndarray
    value: float
    error: float


def expected_divergence(fam: SimplexFamily, vartheta, eta_prime) -> float:
    """E_vartheta[L_{lambda,psi}[Y : eta']] computed exactly on a finite family."""
    df = as_data_family(fam)
    p = fam.probs(vartheta)
    Y = simplex_states_to_data(np.arange(fam.n_states), fam.dim)
    return float(p @ df.log_divergence_psi(Y, eta_prime))


def dual_barycenter_check(fam: SimplexFamily, vartheta, eta_grid=None,
                          cfg: OptimizerConfig | None = None) -> DualBarycenterResult:
    """argmin over eta' of E[L[Y : eta']]: over ``eta_grid`` when given,
    otherwise by continuous optimization; compared with dual_parameter."""
    df = as_data_family(fam)
    t = np.atleast_1d(np.asarray(vartheta, float))
    eta = df.dual_parameter(t)
    p = fam.probs(t)
    Y = simplex_states_to_data(np.arange(fam.n_states), fam.dim)
    if eta_grid is not None:
        G = np.atleast_2d(np.asarray(eta_grid, float))
        vals = np.array([p @ df.log_divergence_psi(Y, g) for g in G])
        k = int(np.argmin(vals))
        return DualBarycenterResult(G[k], eta, float(vals[k]), float(np.max(np.abs(G[k] - eta))))
    # weighted barycenter with exact probabilities as weights
    value, grad = _weighted_objective(df, Y, p)
    cfg = cfg or OptimizerConfig(max_iterations=20000, gradient_tolerance=1e-12)
    res = maximize(lambda e: -value(e), lambda e: -grad(e), df.psi.domain,
                   np.asarray(df.psi.start, float), cfg)
    return DualBarycenterResult(res.x, eta, -res.value, float(np.max(np.abs(res.x - eta))))


def _weighted_objective(df: DataFamily, Y, w):
    l = df.lam.lam

    def value(e):
        g = df.psi.gradient(e)
        s = 1.0 + l * ((Y - e) @ g)
        if np.any(s <= 0):
            return math.inf
        return -df.psi.value(e) - float(w @ np.log(s)) / l

    def grad(e):
        g, H = df.psi.gradient(e), df.psi.hessian(e)
        D = Y - e
        s = 1.0 + l * (D @ g)
        return -g - w @ ((D @ H - g) / s[:, None])

    return value, grad


# ---------------------------------------------------------------------------
# Renyi maximum entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaxEntReport:
    entropy_star: float
    entropies: np.ndarray
    gaps: np.ndarray
    identity_residuals: np.ndarray

    @property
    def min_gap(self) -> float:
        return float(self.gaps.min()) if self.gaps.size else 0.0

    @property
    def max_identity_residual(self) -> float:
        return float(np.max(np.abs(self.identity_residuals))) if self.gaps.size else 0.0


def escort_mean(fam: FiniteFamily, p) -> np.ndarray:
    probs = p.probs if isinstance(p, DiscreteDensity) else np.asarray(p, float)
    with np.errstate(divide="ignore"):  # zero states get zero escort weight
        lw = fam.q * np.log(probs) + np.log(fam.ref)
    w = np.exp(lw - logsumexp(lw))
    return w @ fam.F


def _tilted(fam, logp, h, t, s):
    lw = logp + t * h + fam.F @ s
    return np.exp(lw - logsumexp(lw))


def generate_competitors(fam: FiniteFamily, vartheta_star, n: int = 50, seed: int = 0,
                         tilt_scale: float = 1.0) -> list[DiscreteDensity]:
    """Densities P = p* exp(t h + s.F)/Z with a random direction h and the
    correction s chosen so that the escort mean of P equals that of p*.

    s is found by bisection when F is one-dimensional and by a root finder
    otherwise.  Probabilities are relative to the family's reference weights
    folded into the counting measure."""
    rng = np.random.default_rng(seed)
    pstar = fam.probs(vartheta_star)
    target = escort_mean(fam, pstar)
    logp = np.log(pstar)
    out = []
    while len(out) < n:
        h = rng.standard_normal(fam.n_states)
        t = tilt_scale * rng.uniform(0.2, 1.0)

        def resid(s):
            return escort_mean(fam, _tilted(fam, logp, h, t, np.atleast_1d(s))) - target

        if fam.dim == 1:
            lo, hi = -1.0, 1.0
            while resid(lo)[0] > 0:
                lo *= 2
            while resid(hi)[0] < 0:
                hi *= 2
            s = np.array([optimize.brentq(lambda z: resid(z)[0], lo, hi, xtol=1e-15, rtol=1e-15)])
        else:
            sol = optimize.root(resid, np.zeros(fam.dim), tol=1e-14)
            if not sol.success:
                continue
            s = sol.x
        P = _tilted(fam, logp, h, t, s)
        if np.max(np.abs(escort_mean(fam, P) - target)) <= 1e-10:
            out.append(DiscreteDensity.normalized(P))
    return out


def maxent_check(fam: FiniteFamily, vartheta_star, competitors: Sequence) -> MaxEntReport:
    """For every competitor P with the same escort mean: the Renyi entropy gap
    H(P*) - H(P) and the residual of H(P*) - H(P) - H_q(P || P*).

    Entropies are taken relative to the counting measure, so the family's
    reference weights must be uniform."""
    if not np.allclose(fam.ref, fam.ref[0]):
        raise DomainViolation("maxent_check needs uniform reference weights")
    q = fam.q
    pstar = fam.discrete(vartheta_star)
    target = escort_mean(fam, pstar)
    Hs = renyi_entropy(q, pstar)
    H, gaps, res = [], [], []
    for P in competitors:
        P = P if isinstance(P, DiscreteDensity) else DiscreteDensity.normalized(P)
        dev = float(np.max(np.abs(escort_mean(fam, P) - target)))
        if dev > 1e-8:
            raise ConstraintViolated(f"competitor escort mean deviates by {dev:.3g}")
        h = renyi_entropy(q, P)
        H.append(h)
        gaps.append(Hs - h)
        res.append(Hs - h - renyi_divergence(q, P, pstar))
    return MaxEntReport(Hs, np.array(H), np.array(gaps), np.array(res))


# ---------------------------------------------------------------------------
# CSV data
# ---------------------------------------------------------------------------


def load_data_csv(path, dim: int | None = None) -> np.ndarray:
    """Read one observation per row.  A first row that does not parse as
    numbers is treated as a header.  Raises DataFormatError naming the
    offending row and column."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                bad = next(j for j, c in enumerate(cells, 1) if not _is_float(c))
                raise DataFormatError(
                    f"row {lineno}, column {bad}: cannot parse {cells[bad - 1]!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError(f"row {lineno}: non-finite value")
            if rows and len(vals) != len(rows[0]):
                raise DataFormatError(
                    f"row {lineno}: {len(vals)} columns, expected {len(rows[0])}")
            rows.append(vals)
    if not rows:
        raise DataFormatError("no data rows")
    Y = np.array(rows, dtype=float)
    if dim is not None and Y.shape[1] != dim:
        raise DataFormatError(f"data have {Y.shape[1]} columns, expected {dim}")
    return Y


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


__all__ = [
    "count_out_of_domain",
    "DataFamily", "simplex_data_family", "dirichlet_data_family",
    "gaussian_location_data_family", "as_data_family",
    "likelihood_divergence_repr_check", "dirichlet_cost_form_check",
    "FitResult", "mle_barycenter", "barycenter_objective", "simplex_states_to_data",
    "dirichlet_standard_error", "DualBarycenterResult", "expected_divergence",
    "dual_barycenter_check", "MaxEntReport", "escort_mean", "generate_competitors",
    "maxent_check", "load_data_csv",
]
