"""Command-line front end.

Scalars are printed as JSON, grids as CSV.  Every number is written with 12
significant digits.  Exit codes: 0 success, 2 usage or domain error, 3
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from .divergences import DiscreteDensity, escort, log_divergence, renyi_entropy
from .errors import DataFormatError, DomainError, NumericalError
from .families import (
    CauchyFamily,
    DirichletPerturbationFamily,
    FiniteFamily,
    QGaussianFamily,
    SimplexFamily,
    StudentTFamily,
)
from .geometry import pre_geodesic
from .inference import (
    generate_competitors,
    load_data_csv,
    maxent_check,
    mle_barycenter,
)
from .lambda_core import as_lambda, biconjugate, conjugate, pairing
from .mixtures import (
    EXAMPLE_MIXTURE_COMPONENTS,
    MixtureSpec,
    interpolation_path,
    mixture_grid,
)
from .potentials import (
    BUILTIN,
    builtin_potential,
    envelope_example_potential,
    log_quadratic_potential,
    qgaussian_potential,
    simplex_potential,
)

DIGITS = 12
# column schema of each figure CSV, in output order
FIGURE_COLUMNS = {
    "escort": ("alpha", "t", "power_1", "power_2", "escort_1", "escort_2"),
    "conjugate-envelope": ("curve", "lambda", "v", "u", "value"),
    "ldiv-1d": ("lambda", "u_prime", "u", "f", "approx", "divergence"),
    "renyi-simplex": ("lambda", "q", "p1", "renyi_escort", "vartheta", "phi", "transformed"),
    "qgauss-div": ("lambda", "vartheta0", "vartheta", "divergence", "finite"),
    "mixture-grid": ("lambda", "kind", "component", "eta_0", "eta_1", "eta_2",
                     "p_0", "p_1", "p_2"),
    "t-interpolation": ("df", "alpha", "t", "s", "x", "density"),
}
FIGURES = tuple(FIGURE_COLUMNS)
FAMILIES = ("simplex", "q-gaussian", "cauchy", "student-t", "dirichlet")

RENYI_FIGURE_LAMBDAS = (-5.0, -2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 0.9)


class UsageError(Exception):
    """Bad flag values detected after argparse (mapped to exit code 2)."""


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{DIGITS}g")


def _num(x):
    """JSON-safe number rounded to 12 significant digits (None if not finite)."""
    x = float(x)
    return float(fmt(x)) if math.isfinite(x) else None


def _vec(a) -> list:
    return [_num(v) for v in np.atleast_1d(a)]


def emit_json(obj: dict, out) -> None:
    out.write(json.dumps(obj) + "\n")


def emit_csv(header: Sequence[str], rows: Iterable[Sequence], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])


def parse_point(s: str) -> np.ndarray:
    try:
        vals = [float(t) for t in s.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse point {s!r}; use comma-separated numbers") from None
    if not vals:
        raise UsageError("empty point")
    return np.array(vals)


def parse_list(s: str) -> list[float]:
    return list(parse_point(s))


# ---------------------------------------------------------------------------
# Object construction from flags
# ---------------------------------------------------------------------------


def _potential(args):
    if args.potential not in BUILTIN:
        raise UsageError(f"unknown potential {args.potential!r}; choose from {sorted(BUILTIN)}")
    lam = args.lam if args.lam is not None else 0.0
    return as_lambda(lam), builtin_potential(args.potential, lam, args.dim)


def _family(args):
    kind = args.family
    n = getattr(args, "nodes", None)
    if kind == "simplex":
        return SimplexFamily(_need(args.lam, "--lambda"), args.dim or 2)
    if kind == "q-gaussian":
        return QGaussianFamily(_need(args.lam, "--lambda"), n)
    if kind == "cauchy":
        return CauchyFamily(n)
    if kind == "student-t":
        return StudentTFamily(_need(args.df, "--df"), 1, n)
    if kind == "dirichlet":
        return DirichletPerturbationFamily(args.dim or 2, _need(args.sigma, "--sigma"), n)
    raise UsageError(f"unknown family {kind!r}; choose from {FAMILIES}")


def _need(v, flag):
    if v is None:
        raise UsageError(f"{flag} is required here")
    return v


def _check_dim(x: np.ndarray, dim: int, flag: str):
    if x.size != dim:
        raise UsageError(f"{flag} has {x.size} coordinates, expected {dim}")


def _map(fn: Callable, items: list, threads: int) -> list:
    """Order-preserving map, optionally over a thread pool."""
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_divergence(args, out):
    if args.family:
        fam = _family(args)
        a, b = _need(args.vartheta, "--vartheta"), _need(args.vartheta_prime, "--vartheta-prime")
        a, b = parse_point(a), parse_point(b)
        _check_dim(a, fam.dim, "--vartheta")
        _check_dim(b, fam.dim, "--vartheta-prime")
        lp, f = fam.lam, fam.potential_function()
    else:
        if not args.potential:
            raise UsageError("give --potential or --family")
        lp, f = _potential(args)
        a, b = parse_point(_need(args.u, "--u")), parse_point(_need(args.u_prime, "--u-prime"))
        if a.size != b.size:
            raise UsageError("--u and --u-prime differ in dimension")
    for x, flag in ((a, "first point"), (b, "second point")):
        if not f.domain.contains(x):
            raise DomainError(f"{flag} {x.tolist()} lies outside the domain of {f.name}")
    val = log_divergence(lp, f, a, b)
    emit_json({"value": _num(val), "finite": bool(math.isfinite(val))}, out)


def cmd_conjugate(args, out):
    lp, f = _potential(args)
    if args.grid:
        lo, hi, n = _grid_spec(args.grid)
        vs = [np.array([v]) for v in np.linspace(lo, hi, n)]
        res = _map(lambda v: _conj_row(lp, f, v, args.biconjugate), vs, args.threads)
        emit_csv(["v", "value", "argmax", "converged"],
                 ([v[0], r[0], r[1][0], str(r[2]).lower()] for v, r in zip(vs, res)), out)
        return
    v = parse_point(_need(args.v, "--v"))
    value, arg, conv, it = _conj_row(lp, f, v, args.biconjugate)
    emit_json({"value": _num(value), "argmax": _vec(arg), "converged": conv,
               "iterations": it}, out)


def _conj_row(lp, f, v, bi: bool):
    if bi:
        if not f.domain.contains(v):
            raise DomainError(f"point {v.tolist()} lies outside the domain of {f.name}")
        r = biconjugate(lp, f, v)
    else:
        if f.dual_domain is not None and not f.dual_domain.contains(v):
            raise DomainError(f"point {v.tolist()} lies outside the dual domain of {f.name}")
        r = conjugate(lp, f, v)
    return r.value, r.argmax, bool(r.converged), int(r.iterations)


def _grid_spec(s: str):
    parts = s.split(":")
    if len(parts) != 3:
        raise UsageError("--grid must be START:STOP:NUM")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError("--grid must be START:STOP:NUM") from None
    if n < 1:
        raise UsageError("--grid needs NUM >= 1")
    return lo, hi, n


def cmd_fit(args, out):
    dim = args.dim or 2
    if args.family == "simplex":
        fam = SimplexFamily(_need(args.lam, "--lambda"), dim)
    elif args.family == "dirichlet":
        fam = DirichletPerturbationFamily(dim, _need(args.sigma, "--sigma"))
    else:
        raise UsageError("fit supports --family simplex or dirichlet")
    Y = load_data_csv(args.data, dim)
    r = mle_barycenter(fam, Y, args.method)
    emit_json({"eta_hat": _vec(r.eta_hat), "vartheta_hat": _vec(r.vartheta_hat),
               "objective": _num(r.objective), "iterations": int(r.iterations),
               "converged": bool(r.converged), "method": r.method,
               "out_of_domain": r.out_of_domain}, out)


def cmd_path(args, out):
    lp, f = _potential(args)
    a = parse_point(_need(args.start, "--start"))
    b = parse_point(_need(args.end, "--end"))
    if a.size != b.size:
        raise UsageError("--start and --end differ in dimension")
    g = pre_geodesic(args.kind, lp, f, a, b, args.steps)
    d = a.size
    header = ["t"] + [f"primal_{i + 1}" for i in range(d)] + [f"dual_{i + 1}" for i in range(d)]
    emit_csv(header, ([t, *p, *e] for t, p, e in zip(g.t, g.primal, g.dual)), out)


def cmd_maxent(args, out):
    n = args.states
    fam = FiniteFamily(_need(args.lam, "--lambda"), np.arange(n, dtype=float)[:, None])
    t = parse_point(_need(args.vartheta, "--vartheta"))
    _check_dim(t, 1, "--vartheta")
    comps = generate_competitors(fam, t, args.competitors, args.seed)
    rep = maxent_check(fam, t, comps)
    emit_json({"entropy_star": _num(rep.entropy_star), "competitors": len(comps),
               "min_gap": _num(rep.min_gap),
               "max_identity_residual": _num(rep.max_identity_residual)}, out)


# ---------------------------------------------------------------------------
# Figure data
# ---------------------------------------------------------------------------


def fig_escort(args):
    """Escort map on the 1-simplex: the power trajectory and its normalization."""
    p = np.array([args.p1, 1.0 - args.p1]) if args.p1 is not None else np.array([0.3, 0.7])
    if not (0 < p[0] < 1):
        raise UsageError("--p1 must lie in (0, 1)")
    alphas = args.alphas or [0.5, 3.0]
    header = ["alpha", "t", "power_1", "power_2", "escort_1", "escort_2"]
    rows = []
    for a in alphas:
        for t in np.linspace(0.0, 1.0, 21):
            e = (1 - t) + t * a
            pw = p ** e
            rows.append([a, t, *pw, *(pw / pw.sum())])
    return header, rows


def fig_conjugate_envelope(args):
    """Pairing curves and the envelope of pairing - g(v), g(v) = v."""
    lam = args.lam if args.lam is not None else 0.5
    f = envelope_example_potential(lam)
    us = np.linspace(0.05, 5.0, 100)
    vs = np.linspace(-5.0, 5.0, 11)
    rows = []
    for v in vs:
        for u in us:
            c = pairing(lam, [u], [v])
            rows.append(["pairing", lam, v, u, c])
            rows.append(["support", lam, v, u, c - v])
    for u in us:
        rows.append(["f", lam, "", u, f.value([u])])
    return ["curve", "lambda", "v", "u", "value"], rows


def fig_ldiv_1d(args):
    """f, its logarithmic first-order approximation at u' and the gap L[u : u']."""
    lams = args.lambdas or [0.7, -1.0]
    up = args.u_prime if args.u_prime is not None else 0.5
    rows = []
    for lam in lams:
        f = log_quadratic_potential(lam)
        r = math.sqrt(2.0 / abs(lam))
        fu, g = f.value([up]), f.gradient([up])[0]
        for u in np.linspace(-0.95 * r, 0.95 * r, 101):
            s = 1.0 + lam * g * (u - up)
            approx = fu + math.log(s) / lam if s > 0 else -math.inf
            rows.append([lam, up, u, f.value([u]), approx, log_divergence(lam, f, [u], [up])])
    return ["lambda", "u_prime", "u", "f", "approx", "divergence"], rows


def fig_renyi_simplex(args):
    """Renyi entropy of the escort over the 1-simplex and the transformed
    potential (e^(lambda phi) - 1)/lambda in vartheta-coordinates."""
    lams = args.lambdas or list(RENYI_FIGURE_LAMBDAS)
    lams = sorted(set(lams) | {0.0})
    rows = []
    for lam in lams:
        lp = as_lambda(lam)
        fam = SimplexFamily(lam, 1)
        f = simplex_potential(lp, 1)
        for p1 in np.linspace(0.01, 0.99, 99):
            p = DiscreteDensity(np.array([1.0 - p1, p1]))
            h = renyi_entropy(lp.q, escort(lp.q, p))
            t = fam.vartheta_from_probs(p.probs)
            phi = f.value(t)
            tr = phi if lp.classical else math.expm1(lam * phi) / lam
            rows.append([lam, lp.q, p1, h, t[0], phi, tr])
    return ["lambda", "q", "p1", "renyi_escort", "vartheta", "phi", "transformed"], rows


def fig_qgauss_div(args):
    """vartheta -> L[vartheta : vartheta_0] for the q-Gaussian potential."""
    t0 = args.vartheta0 if args.vartheta0 is not None else 2.0
    lams = args.lambdas or [l for l in RENYI_FIGURE_LAMBDAS if l > -2]
    f = qgaussian_potential()
    rows = []
    for lam in lams:
        for t in np.linspace(0.05, 10.0, 200):
            d = log_divergence(lam, f, [t], [t0])
            rows.append([lam, t0, t, d, str(bool(math.isfinite(d))).lower()])
    return ["lambda", "vartheta0", "vartheta", "divergence", "finite"], rows


def fig_mixture_grid(args):
    """lambda-mixture densities over a uniform eta-grid of the closed 2-simplex."""
    lams = args.lambdas or [-2.0, 0.7]
    spec = MixtureSpec.discrete(EXAMPLE_MIXTURE_COMPONENTS)
    rows = []
    for i, c in enumerate(EXAMPLE_MIXTURE_COMPONENTS):
        for lam in lams:
            rows.append([lam, "component", i, "", "", "", *c])
    for lam in lams:
        etas, dens = mixture_grid(lam, spec, args.resolution or 20)
        for e, p in zip(etas, dens):
            rows.append([lam, "mixture", "", *e, *p])
    return ["lambda", "kind", "component", "eta_0", "eta_1", "eta_2", "p_0", "p_1", "p_2"], rows


def fig_t_interpolation(args):
    """Densities along the alpha-mixture path between two Student-t members."""
    dfs = args.dfs or [3.0, 30.0]
    (m0, s0), (m1, s1) = (-4.0, 0.7), (3.0, 1.0)
    xs = np.linspace(-10.0, 10.0, 201)
    rows = []
    for k in dfs:
        fam = StudentTFamily(k, 1)
        members = [fam.vartheta_from_location_scale(m0, s0 ** 2),
                   fam.vartheta_from_location_scale(m1, s1 ** 2)]
        path = interpolation_path(fam, members, [1.0, 0.0], [0.0, 1.0], steps=11)
        alpha = 1.0 - 2.0 * fam.lam.lam
        for t, s, v in zip(path.t, path.s, path.vartheta):
            dens = fam.density(v, xs[:, None])
            for x, d in zip(xs, dens):
                rows.append([k, alpha, t, s, x, d])
    return ["df", "alpha", "t", "s", "x", "density"], rows


FIGURE_FNS = {
    "escort": fig_escort,
    "conjugate-envelope": fig_conjugate_envelope,
    "ldiv-1d": fig_ldiv_1d,
    "renyi-simplex": fig_renyi_simplex,
    "qgauss-div": fig_qgauss_div,
    "mixture-grid": fig_mixture_grid,
    "t-interpolation": fig_t_interpolation,
}


def cmd_figure(args, out):
    if args.out is not None and args.out.strip() == "":
        raise UsageError("--out is empty")
    header, rows = FIGURE_FNS[args.which](args)
    if args.out is None:
        emit_csv(header, rows, out)
        return
    buf = io.StringIO()
    emit_csv(header, rows, buf)
    with open(args.out, "w", newline="") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="file of 'key = value' lines; keys are flag names")
    p.add_argument("--threads", type=int, default=1, help="worker threads for grid evaluations")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="lambda-duality", description="lambda-duality calculus and figure data")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("divergence", help="lambda-logarithmic divergence L[u : u']")
    p.add_argument("--lambda", dest="lam", type=float, help="deformation parameter")
    p.add_argument("--potential", help=f"built-in potential: {', '.join(sorted(BUILTIN))}")
    p.add_argument("--dim", type=int, help="dimension for dimension-dependent potentials/families")
    p.add_argument("--u", help="first point, comma-separated")
    p.add_argument("--u-prime", dest="u_prime", help="second point, comma-separated")
    p.add_argument("--family", choices=FAMILIES, help="use the divisive potential of a family")
    p.add_argument("--vartheta", help="first natural parameter")
    p.add_argument("--vartheta-prime", dest="vartheta_prime", help="second natural parameter")
    p.add_argument("--df", type=float, help="degrees of freedom (student-t)")
    p.add_argument("--sigma", type=float, help="noise level (dirichlet)")
    p.add_argument("--nodes", type=int, help="quadrature nodes for integral families")
    _common(p)
    subs["divergence"] = p

    p = sub.add_parser("conjugate", help="c_lambda-conjugate of a built-in potential")
    p.add_argument("--lambda", dest="lam", type=float, help="deformation parameter")
    p.add_argument("--potential", required=True, help=f"one of {', '.join(sorted(BUILTIN))}")
    p.add_argument("--dim", type=int, help="dimension for dimension-dependent potentials")
    p.add_argument("--v", help="dual point, comma-separated")
    p.add_argument("--grid", help="START:STOP:NUM grid of 1-d points; emits CSV")
    p.add_argument("--biconjugate", action="store_true",
                   help="treat the point as primal and return (f^c)^c")
    _common(p)
    subs["conjugate"] = p

    p = sub.add_parser("fit", help="maximum likelihood as a right barycenter")
    p.add_argument("--family", required=True, choices=("simplex", "dirichlet"))
    p.add_argument("--data", required=True, help="CSV, one observation y = F(x) per row")
    p.add_argument("--method", choices=("barycenter", "likelihood"), default="barycenter")
    p.add_argument("--lambda", dest="lam", type=float, help="deformation parameter (simplex)")
    p.add_argument("--sigma", type=float, help="noise level (dirichlet)")
    p.add_argument("--dim", type=int, help="statistic dimension (default 2)")
    _common(p)
    subs["fit"] = p

    p = sub.add_parser("path", help="primal or dual pre-geodesic of a built-in potential")
    p.add_argument("--kind", choices=("primal", "dual"), default="primal")
    p.add_argument("--lambda", dest="lam", type=float, help="deformation parameter")
    p.add_argument("--potential", required=True, help=f"one of {', '.join(sorted(BUILTIN))}")
    p.add_argument("--dim", type=int, help="dimension for dimension-dependent potentials")
    p.add_argument("--start", help="start point in the chart of --kind")
    p.add_argument("--end", help="end point in the chart of --kind")
    p.add_argument("--steps", type=int, default=21, help="number of points")
    _common(p)
    subs["path"] = p

    p = sub.add_parser("maxent", help="Renyi maximum-entropy check on states 0..n-1 with F(x) = x")
    p.add_argument("--lambda", dest="lam", type=float, help="deformation parameter")
    p.add_argument("--states", type=int, default=4, help="number of states")
    p.add_argument("--vartheta", help="natural parameter of the maximizer")
    p.add_argument("--competitors", type=int, default=50, help="number of competitors")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    _common(p)
    subs["maxent"] = p

    p = sub.add_parser("figure", help="CSV data behind the illustrations")
    p.add_argument("--which", required=True, choices=FIGURES)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--lambda", dest="lam", type=float, help="lambda (conjugate-envelope)")
    p.add_argument("--lambdas", type=parse_list, help="comma-separated lambda list")
    p.add_argument("--alphas", type=parse_list, help="escort exponents (escort)")
    p.add_argument("--p1", type=float, help="first coordinate of p (escort)")
    p.add_argument("--u-prime", dest="u_prime", type=float, help="base point (ldiv-1d)")
    p.add_argument("--vartheta0", type=float, help="second argument (qgauss-div)")
    p.add_argument("--resolution", type=int, help="eta-grid denominator (mixture-grid)")
    p.add_argument("--dfs", type=parse_list, help="degrees of freedom (t-interpolation)")
    _common(p)
    subs["figure"] = p
    return parser, subs


def _config_path(argv: list[str]) -> str | None:
    for i, a in enumerate(argv):
        if a == "--config":
            return argv[i + 1] if i + 1 < len(argv) else None
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _apply_config(sub: argparse.ArgumentParser, path: str) -> None:
    """Install the 'key = value' lines of ``path`` as parser defaults, so that
    flags given on the command line still win and required flags may come
    from the file."""
    actions = {}
    for a in sub._actions:
        for o in a.option_strings:
            if o.startswith("--"):
                actions[o[2:]] = a
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected 'key = value'")
            key, val = (t.strip() for t in line.split("=", 1))
            key = key.lstrip("-").replace("_", "-")
            a = actions.get(key)
            if a is None or key in ("config", "help"):
                raise UsageError(f"config line {lineno}: unknown key {key!r}")
            if isinstance(a, argparse._StoreTrueAction):
                v = val.lower() in ("1", "true", "yes", "on")
            else:
                v = a.type(val) if a.type else val
                if a.choices is not None and v not in a.choices:
                    raise UsageError(f"config line {lineno}: {key} must be one of {a.choices}")
            sub.set_defaults(**{a.dest: v})
            a.required = False


COMMANDS = {
    "divergence": cmd_divergence,
    "conjugate": cmd_conjugate,
    "fit": cmd_fit,
    "path": cmd_path,
    "maxent": cmd_maxent,
    "figure": cmd_figure,
}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    parser, subs = build_parser()
    cfg = _config_path(argv)
    if cfg is not None and argv and argv[0] in subs:
        try:
            _apply_config(subs[argv[0]], cfg)
        except (UsageError, OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        COMMANDS[args.command](args, out)
    except (UsageError, DomainError, DataFormatError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
