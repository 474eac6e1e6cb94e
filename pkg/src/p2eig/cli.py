"""Command-line interface: ``p2eig {linear,solve,branch,multiplicity,verify}``.

Exit codes: 0 success, 2 configuration error, 3 trivial verdict (no
nontrivial solution), 4 solver failure, 5 failed invariant.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bifurcation as bif
from . import multiplicity as mult
from . import solver as sol
from . import svg
from .errors import P2EigError
from .functionals import EnergySetting
from .grid import Grid

EXIT_OK, EXIT_CONFIG, EXIT_TRIVIAL, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4, 5


class ConfigError(Exception):
    pass


def _common(parser, needs_p=True, needs_lambda=True):
    g = parser.add_argument_group("grid")
    g.add_argument("--dim", type=int, default=1, choices=(1, 2))
    g.add_argument("--cells", type=int, nargs="+", default=[256],
                   help="cells per axis (one value, or one per axis)")
    g.add_argument("--bounds", type=float, nargs="+", default=None,
                   help="a b (interval) or a b c d (rectangle); default unit interval/square")
    if needs_p:
        parser.add_argument("--p", type=float, required=True)
    if needs_lambda:
        parser.add_argument("--lambda", dest="lam", type=float, required=True)
    parser.add_argument("--epsilon", type=float, default=0.0)
    parser.add_argument("--tol", type=float, default=1e-11)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--format", dest="formats", action="append",
                        choices=("json", "csv", "svg"), default=None,
                        help="output format; repeat for several")


def build_parser():
    ap = argparse.ArgumentParser(prog="p2eig", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("linear", help="Dirichlet eigenvalues of the Laplacian")
    _common(p, needs_p=False, needs_lambda=False)
    p.add_argument("--k", type=int, default=3)

    p = sub.add_parser("solve", help="first nonlinear eigenpair at one lambda")
    _common(p)

    p = sub.add_parser("branch", help="continuation of the first branch in lambda")
    _common(p, needs_lambda=False)
    p.add_argument("--lambda-min", type=float, required=True)
    p.add_argument("--lambda-max", type=float, required=True)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--offset", action="store_true",
                   help="interpret --lambda-min/--lambda-max relative to lambda_1")

    p = sub.add_parser("multiplicity", help="catalog of k distinct solutions")
    _common(p)
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--cells", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", nargs="+", default=None, help="substrings of check names")
    p.add_argument("--out", type=Path, default=None)
    return ap


# -- helpers -----------------------------------------------------------------------------

def _grid(args):
    if any(c < 2 for c in args.cells):
        raise ConfigError("--cells must be at least 2")
    if args.bounds is None:
        bounds = [(0.0, 1.0)] * args.dim
    else:
        b = args.bounds
        if len(b) != 2 * args.dim:
            raise ConfigError(f"--bounds needs {2 * args.dim} numbers for dim={args.dim}")
        bounds = [(b[2 * i], b[2 * i + 1]) for i in range(args.dim)]
    cells = args.cells if len(args.cells) > 1 else args.cells * args.dim
    try:
        return Grid(args.dim, bounds, cells)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _setting(args, lam):
    if args.p == 2:
        raise ConfigError("p = 2 is excluded: the problem needs p in (1, 2) or (2, inf)")
    try:
        return EnergySetting(args.p, lam, args.epsilon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _config(args):
    try:
        return sol.SolverConfig(tol=args.tol, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _targets(args, default):
    """``(format, path-or-None)`` pairs; several formats share the stem of ``--out``."""
    formats = args.formats or [default]
    if len(formats) > 1 and args.out is None:
        raise ConfigError("several --format values need --out")
    out = []
    for f in formats:
        if args.out is None:
            if f == "svg":
                raise ConfigError("--format svg needs --out")
            out.append((f, None))
        else:
            out.append((f, args.out if len(formats) == 1 else args.out.with_suffix("." + f)))
    return out


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _json(obj):
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


# -- commands --------------------------------------------------------------------------------

def cmd_linear(args):
    g = _grid(args)
    if not 1 <= args.k <= g.n_interior:
        raise ConfigError(f"--k must lie in [1, {g.n_interior}]")
    pairs = sol.linear_eigs(g, args.k)
    lines = ["  k        lambda_k"] + [f"{j + 1:3d}  {lam:.12g}" for j, (lam, _) in enumerate(pairs)]
    payload = {"schema": 1, "grid": g.to_dict(),
               "eigenpairs": [{"k": j + 1, "lambda": lam, "values": [float(x) for x in e]}
                              for j, (lam, e) in enumerate(pairs)]}
    print("\n".join(lines))
    if args.out is not None:
        _emit(_json(payload), args.out)
    return EXIT_OK


def cmd_solve(args):
    g = _grid(args)
    st = _setting(args, args.lam)
    if not st.lam > 0:
        raise ConfigError("--lambda must be positive")
    targets = _targets(args, "json")
    pair = sol.solve_first(g, st, _config(args))
    data = pair.to_dict(g)
    for fmt, path in targets:
        if fmt == "json":
            _emit(_json(data), path)
        elif fmt == "svg":
            _emit(svg.profile_svg(g, pair.u, f"p={st.p:g}, lambda={st.lam:g}"), path)
        else:
            raise ConfigError("solve writes json or svg")
    msg = "trivial verdict" if pair.trivial else f"residual {pair.residual:.3e}"
    print(f"p={st.p:g} lambda={st.lam:g}: {msg}", file=sys.stderr)
    return EXIT_TRIVIAL if pair.trivial else EXIT_OK


def cmd_branch(args):
    g = _grid(args)
    _setting(args, 1.0)
    if args.points < 2 or args.lambda_max <= args.lambda_min:
        raise ConfigError("need --points >= 2 and --lambda-max > --lambda-min")
    lam1 = sol.lambda_1(g)
    shift = lam1 if args.offset else 0.0
    lams = np.linspace(args.lambda_min, args.lambda_max, args.points) + shift
    if lams[0] <= lam1:
        raise ConfigError(f"all lambda values must exceed lambda_1 = {lam1:.12g}")
    targets = _targets(args, "csv")
    branch = bif.trace_branch(g, args.p, lams, _config(args), epsilon=args.epsilon)
    fit = bif.fit_scaling(branch, lam1) if len(branch) >= 5 else None
    for fmt, path in targets:
        if fmt == "csv":
            _emit(branch.to_csv(), path)
        elif fmt == "json":
            _emit(_json({"schema": 1, "p": args.p, "lambda_1": lam1, "grid": g.to_dict(),
                         "points": [dict(zip(bif.CSV_HEADER, pt.row())) for pt in branch],
                         "capped": branch.capped,
                         "fit": None if fit is None else vars(fit) | {"window": list(fit.window)}}),
                  path)
        else:
            _emit(svg.branch_svg(branch.lambdas - lam1, branch.l2_norms,
                                 None if fit is None else (fit.slope, fit.intercept),
                                 f"p={args.p:g} first branch"), path)
    if fit is not None:
        print(f"slope {fit.slope:.6f} (one-mode law {1 / (args.p - 2):.6f}), "
              f"r^2 {fit.r_squared:.8f}", file=sys.stderr)
    return EXIT_OK


def cmd_multiplicity(args):
    g = _grid(args)
    st = _setting(args, args.lam)
    if args.k < 1:
        raise ConfigError("--k must be positive")
    pairs = sol.linear_eigs(g, min(args.k + 1, g.n_interior))
    if not pairs[args.k - 1][0] < st.lam < (pairs[args.k][0] if len(pairs) > args.k else np.inf):
        raise ConfigError(f"--lambda must lie between lambda_{args.k} and lambda_{args.k + 1}")
    targets = _targets(args, "json")
    cat = mult.find_k_solutions(g, st, args.k, _config(args))
    print(cat.summary())
    for fmt, path in targets:
        if fmt != "json":
            raise ConfigError("multiplicity writes json")
        if path is not None:
            _emit(_json(cat.to_dict(g)), path)
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_verify
    if args.cells < 16:
        raise ConfigError("--cells must be at least 16 for the verify suite")
    report = run_verify(seed=args.seed, cells=args.cells, only=args.only)
    text = report.text()
    sys.stdout.write(text)
    if args.out is not None:
        _emit(text, args.out)
    return EXIT_OK if report.ok else EXIT_INVARIANT


COMMANDS = {"linear": cmd_linear, "solve": cmd_solve, "branch": cmd_branch,
            "multiplicity": cmd_multiplicity, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"p2eig {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except P2EigError as exc:
        print(f"p2eig {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
