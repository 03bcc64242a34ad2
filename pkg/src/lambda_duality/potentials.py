"""Built-in potentials with analytic gradients and Hessians."""

from __future__ import annotations

import math

import numpy as np

from .lambda_core import Potential, as_lambda
from .numerics import Box, OpenSimplex, Predicate


def quadratic(dim: int = 1, lam=None) -> Potential:
    """f(u) = |u|^2 / 2.  With a deformed lambda the domain is the ball
    |u|^2 < 1/|lambda| on which f is regular."""
    if lam is None or as_lambda(lam).classical:
        dom = Box.real_space(dim)
    else:
        r2 = 1.0 / abs(as_lambda(lam).lam)
        dom = Predicate(lambda u: float(u @ u) < r2, dim, "ball")
    return Potential(
        lambda u: 0.5 * float(u @ u), dom,
        lambda u: u.copy(), lambda u: np.eye(u.size),
        dual_domain=Box.real_space(dim) if lam is None or as_lambda(lam).classical else None,
        start=(0.1,) * dim, dual_start=(0.1,) * dim, name="quadratic",
    )


def linear(c) -> Potential:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return Potential(
        lambda u: float(c @ u), Box.real_space(c.size),
        lambda u: c.copy(), lambda u: np.zeros((c.size, c.size)),
        start=(0.0,) * c.size, name="linear",
    )


def qgaussian_potential(const: float = 0.0) -> Potential:
    """phi(vartheta) = -log(vartheta)/2 + const on (0, inf)."""
    return Potential(
        lambda t: -0.5 * math.log(t[0]) + const,
        Box.positive_orthant(1),
        lambda t: np.array([-0.5 / t[0]]),
        lambda t: np.array([[0.5 / t[0] ** 2]]),
        dual_domain=Box.negative_orthant(1),
        start=(1.0,), dual_start=(-0.5,), name="q-gaussian",
    )


def qgaussian_product_potential(dim: int = 2) -> Potential:
    """sum_i -log(vartheta_i)/2; regular for -2/dim < lambda (and lambda > -1
    for the Hessian condition when dim = 2)."""
    return Potential(
        lambda t: -0.5 * float(np.sum(np.log(t))),
        Box.positive_orthant(dim),
        lambda t: -0.5 / t,
        lambda t: np.diag(0.5 / t ** 2),
        dual_domain=Box.negative_orthant(dim),
        start=(1.0,) * dim, dual_start=(-0.5,) * dim, name="q-gaussian-product",
    )


def cauchy_potential(lam=-1.0) -> Potential:
    """-log(-t2 - t1^2/4)/2 + log(pi) on the parabola region t1^2 + 4 t2 < 0.

    For lambda > 0 the normalization condition 1 - lambda grad.t > 0 holds only
    on the narrower parabola t1^2 (1/4 + 1/c) + t2 < 0 with
    c = 8 (1 + lambda/2) / lambda, which is used as the domain.
    """
    lam = as_lambda(lam).lam

    def h(t):
        return -t[1] - 0.25 * t[0] ** 2

    def fn(t):
        return -0.5 * math.log(h(t)) + math.log(math.pi)

    def grad(t):
        hh = h(t)
        return np.array([t[0] / (4 * hh), 1.0 / (2 * hh)])

    def hess(t):
        hh = h(t)
        return np.array([
            [1 / (4 * hh) + t[0] ** 2 / (8 * hh ** 2), t[0] / (4 * hh ** 2)],
            [t[0] / (4 * hh ** 2), 1 / (2 * hh ** 2)],
        ])

    if lam > 0:
        k = 0.25 + lam / (8 * (1 + lam / 2))
        dom = Predicate(lambda t: k * t[0] ** 2 + t[1] < 0, 2, "parabola")
        dual = Predicate(lambda v: v[1] > 0, 2, "upper-half-plane")
    else:
        dom = Predicate(lambda t: t[0] ** 2 + 4 * t[1] < 0, 2, "parabola")
        a = abs(lam)
        dual = Predicate(lambda v: v[1] > a * v[0] ** 2, 2, "parabola")
    return Potential(fn, dom, grad, hess, dual, (0.0, -1.0),
                     (0.0, 1.0 / (2.0 + lam)), "cauchy")


def simplex_potential(lam, dim: int) -> Potential:
    """phi(vartheta) = log(1 + sum_i (1 + lambda vartheta_i)^(1/lambda)), the
    divisive potential of the finite simplex family in Box-Cox coordinates."""
    lp = as_lambda(lam)
    l = lp.lam
    if lp.classical:
        def parts(t):
            b = np.exp(t)
            return b, b, b  # b, d b/dt, d^2 b/dt^2
        dom = Box.real_space(dim)
    else:
        def parts(t):
            base = 1.0 + l * t
            b = np.exp(np.log(base) / l)
            return b, b / base, (1.0 - l) * b / base ** 2
        if l > 0:
            dom = Box(((-1.0 / l),) * dim, (math.inf,) * dim)
        else:
            dom = Box((-math.inf,) * dim, ((1.0 / -l),) * dim)

    def fn(t):
        return math.log1p(float(np.sum(parts(t)[0])))

    def grad(t):
        b, db, _ = parts(t)
        return db / (1.0 + b.sum())

    def hess(t):
        b, db, d2b = parts(t)
        S = 1.0 + b.sum()
        a = db / S
        return np.diag(d2b / S) - np.outer(a, a)

    return Potential(fn, dom, grad, hess, OpenSimplex(dim), (0.0,) * dim,
                     (1.0 / (dim + 1),) * dim, "simplex")


def renyi_simplex_potential(lam, dim: int) -> Potential:
    """psi(eta) = -Renyi entropy of order q of escort(1/q, p), p = (1 - sum eta,
    eta), written as (q/lambda) log sum_j p_j^(1/q).  Negative Shannon entropy
    in the classical limit.  Coordinates drop component 0."""
    lp = as_lambda(lam)
    l, q = lp.lam, lp.q
    A = np.hstack([-np.ones((dim, 1)), np.eye(dim)])

    def full(e):
        return np.concatenate([[1.0 - e.sum()], e])

    if lp.classical:
        def fn(e):
            p = full(e)
            return float(np.sum(p * np.log(p)))

        def grad(e):
            p = full(e)
            return np.log(p[1:]) - np.log(p[0])

        def hess(e):
            p = full(e)
            return np.diag(1.0 / p[1:]) + 1.0 / p[0]
    else:
        def fn(e):
            p = full(e)
            return (q / l) * math.log(float(np.sum(p ** (1.0 / q))))

        def grad(e):
            p = full(e)
            Z = np.sum(p ** (1.0 / q))
            b = p ** (1.0 / q - 1.0) / (l * Z)
            return b[1:] - b[0]

        def hess(e):
            p = full(e)
            Z = np.sum(p ** (1.0 / q))
            b = p ** (1.0 / q - 1.0) / (l * Z)
            Hf = np.diag(p ** (1.0 / q - 2.0) / (q * Z)) - (l / q) * np.outer(b, b)
            return A @ Hf @ A.T

    sp = simplex_potential(lp, dim)
    return Potential(fn, OpenSimplex(dim), grad, hess, sp.domain,
                     (1.0 / (dim + 1),) * dim, (0.0,) * dim, "renyi-simplex")


def excess_growth_potential(w) -> Potential:
    """-sum_i w_i log u_i on the positive orthant."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    return Potential(
        lambda u: -float(w @ np.log(u)), Box.positive_orthant(w.size),
        lambda u: -w / u, lambda u: np.diag(w / u ** 2),
        start=(1.0,) * w.size, name="excess-growth",
    )


def neg_shannon_potential(n: int) -> Potential:
    """sum_i p_i log p_i on the positive orthant (full coordinates)."""
    return Potential(
        lambda p: float(np.sum(p * np.log(p))), Box.positive_orthant(n),
        lambda p: np.log(p) + 1.0, lambda p: np.diag(1.0 / p),
        start=(1.0 / n,) * n, name="neg-shannon",
    )


def envelope_example_potential(lam=0.5) -> Potential:
    """f(u) = (1/lambda)(1/u - 1 + log u) on (0, inf): the c_lambda-conjugate
    of the linear function g(v) = v."""
    l = as_lambda(lam).lam
    return Potential(
        lambda u: (1.0 / u[0] - 1.0 + math.log(u[0])) / l,
        Box.positive_orthant(1),
        lambda u: np.array([(-1.0 / u[0] ** 2 + 1.0 / u[0]) / l]),
        lambda u: np.array([[(2.0 / u[0] ** 3 - 1.0 / u[0] ** 2) / l]]),
        dual_domain=Box((-math.inf,), (1.0 / l,)) if l > 0 else Box((1.0 / l,), (math.inf,)),
        start=(1.0,), dual_start=(0.0,), name="envelope-example",
    )


def log_quadratic_potential(lam) -> Potential:
    """f(u) = (1/lambda) log(1 + lambda u^2/2) on |u| < sqrt(2/|lambda|).

    Its Box-Cox transform (e^(lambda f) - 1)/lambda is exactly u^2/2, so it is
    regular for either sign of lambda."""
    l = as_lambda(lam).lam
    r = math.sqrt(2.0 / abs(l))
    return Potential(
        lambda u: math.log1p(0.5 * l * u[0] ** 2) / l,
        Box((-r,), (r,)),
        lambda u: np.array([u[0] / (1 + 0.5 * l * u[0] ** 2)]),
        lambda u: np.array([[(1 - 0.5 * l * u[0] ** 2) / (1 + 0.5 * l * u[0] ** 2) ** 2]]),
        dual_domain=Box.real_space(1), start=(0.0,), dual_start=(0.0,),
        name="log-quadratic",
    )


def dirichlet_potential(lam, dim: int) -> Potential:
    """sum_i log(-vartheta_i) / (lambda (1 + d)) on the negative orthant."""
    l = as_lambda(lam).lam
    c = 1.0 / (l * (1 + dim))
    return Potential(
        lambda t: c * float(np.sum(np.log(-t))), Box.negative_orthant(dim),
        lambda t: c / t, lambda t: np.diag(-c / t ** 2),
        dual_domain=Box.positive_orthant(dim),
        start=(1.0 / l,) * dim, dual_start=(1.0,) * dim, name="dirichlet",
    )


def dirichlet_dual_potential(lam, dim: int) -> Potential:
    """Closed-form c_lambda-conjugate of the Dirichlet perturbation potential:
    (1/lambda) log(1 + d) + sum_i log(-lambda eta_i) / (lambda (1 + d))."""
    l = as_lambda(lam).lam
    c = 1.0 / (l * (1 + dim))
    return Potential(
        lambda e: math.log(1 + dim) / l + c * float(np.sum(np.log(-l * e))),
        Box.positive_orthant(dim),
        lambda e: c / e, lambda e: np.diag(-c / e ** 2),
        dual_domain=Box.negative_orthant(dim),
        start=(1.0,) * dim, dual_start=(1.0 / l,) * dim, name="dirichlet-dual",
    )


BUILTIN = {
    "quadratic": lambda lam, dim=1: quadratic(dim, None if as_lambda(lam).classical else lam),
    "q-gaussian": lambda lam, dim=1: qgaussian_potential(),
    "q-gaussian-product": lambda lam, dim=2: qgaussian_product_potential(dim),
    "cauchy": lambda lam, dim=2: cauchy_potential(lam),
    "simplex": lambda lam, dim=2: simplex_potential(lam, dim),
    "renyi-simplex": lambda lam, dim=2: renyi_simplex_potential(lam, dim),
    "envelope-example": lambda lam, dim=1: envelope_example_potential(lam),
    "log-quadratic": lambda lam, dim=1: log_quadratic_potential(lam),
    "dirichlet": lambda lam, dim=2: dirichlet_potential(lam, dim),
    "dirichlet-dual": lambda lam, dim=2: dirichlet_dual_potential(lam, dim),
}


def builtin_potential(name: str, lam, dim: int | None = None) -> Potential:
    """Look up a built-in potential by name (see ``BUILTIN``)."""
    if name not in BUILTIN:
        raise KeyError(f"unknown potential {name!r}; choose from {sorted(BUILTIN)}")
    return BUILTIN[name](lam) if dim is None else BUILTIN[name](lam, dim)


__all__ = [n for n in dir() if n.endswith("_potential")] + ["quadratic", "linear", "BUILTIN"]
