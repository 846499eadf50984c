"""Command line entry point: ``equiorb <verb> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import AliasError, CollisionError, ParseError, SchemaError, UnsupportedDimension, ValidationError
from .io import IOFailure, export_trajectory, load_result, parse_problem, store_result
from .optimize import OptimizerOptions, find_orbits

EXIT_OK, EXIT_VALIDATION, EXIT_NO_CONVERGENCE, EXIT_IO = 0, 2, 3, 4


def _options(problem, args):
    opts = problem.source.get("optimizer") or OptimizerOptions()
    changes = {}
    if args.method:
        changes["method"] = args.method
    if args.max_iter is not None:
        changes["max_iterations"] = args.max_iter
    if args.tol is not None:
        changes["gradient_tolerance"] = args.tol
    return replace(opts, **changes)


def cmd_init(args):
    problem = parse_problem(args.problem)
    print(f"{problem.name}: n = {problem.n}, d = {problem.d}, {problem.action_type} action, "
          f"|G| = {len(problem.group)}, F = {problem.F}")
    print(problem.diagnostics.summary())
    return EXIT_OK


def cmd_info(args):
    problem = parse_problem(args.problem, diagnose_problem=False)
    print(f"symmetry        {problem.name}")
    print(f"bodies, dim     {problem.n}, {problem.d}")
    print(f"masses          {', '.join(f'{m:g}' for m in problem.masses)}")
    print(f"action type     {problem.action_type}")
    print(f"|G|             {len(problem.group)}")
    print(f"|ker tau|       {len(problem.kernel)}")
    print(f"|G / ker tau|   {problem.m}")
    print(f"period          {problem.m} pi = {problem.period:.6f}")
    print("fundamental     [0, pi]")
    print(f"|H0|, |H1|      {len(problem.H0)}, {len(problem.H1)}")
    print(f"coefficients    {problem.ncoeff} = {' x '.join(map(str, problem.coeff_shape))}")
    print("elements:")
    step = problem.m // problem.rotation_order  # time advance of one rotation, in units of pi
    for k, g in enumerate(problem.group):
        time = ("t -> -t" if g.flip else "t -> t") + (f" + {g.shift * step} pi" if g.shift else "")
        rho = np.array2string(g.rho, precision=4, suppress_small=True).replace("\n", "")
        print(f"  {k:3d}  {g.sigma.to_cycles():12s} {time:16s} {rho}")
    return EXIT_OK


def cmd_solve(args):
    problem = parse_problem(args.problem)
    opts = _options(problem, args)
    results = find_orbits(problem, args.starts, opts, seed=args.seed, workers=args.workers)
    converged = [r for r in results if r.converged]
    for k, r in enumerate(results):
        print(f"start {k:3d}: {r.termination:16s} action {r.action_value:.8f}  "
              f"|grad| {r.gradient_norm:.2e}  iterations {r.iterations}")
    if not converged:
        print("no run converged", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    print(f"{len(converged)} of {len(results)} runs converged")
    outdir = Path(args.out)
    if args.keep == "best":
        converged = [min(converged, key=lambda r: r.action_value)]
    for r in converged:
        print(f"stored {store_result(r, problem, outdir)}")
    return EXIT_OK


def cmd_verify(args):
    from .diagnostics import verify_orbit

    stored = load_result(args.result)
    report = verify_orbit(stored.fourier_coeff, stored.problem, args.dense_S)
    for key, value in report.to_dict().items():
        print(f"{key:28s} {value:.6g}" if isinstance(value, float) else f"{key:28s} {value}")
    print("verdict                      " + ("ok" if report.passes() else "flagged"))
    return EXIT_OK


def cmd_export(args):
    stored = load_result(args.result)
    out = args.out or Path(args.result).with_suffix("." + args.format)
    path = export_trajectory(stored.problem, stored.fourier_coeff, args.samples, args.format, out)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_render(args):
    from .render import render_orbit

    stored = load_result(args.result)
    out = args.out or Path(args.result).with_suffix(".svg")
    print(f"wrote {render_orbit(stored.problem, stored.fourier_coeff, out, args.samples)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="equiorb", description="Symmetric periodic orbits of the n-body problem.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("init", help="validate a problem file and print diagnostics")
    p.add_argument("problem")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("info", help="print the group table and fundamental-domain data")
    p.add_argument("problem")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("solve", help="multi-start orbit search")
    p.add_argument("problem")
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--method", help="method or comma separated chain, e.g. bfgs,newton_trustregion")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=".", help="directory that receives <symmetry_name>/")
    p.add_argument("--keep", choices=("all", "best"), default="all")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check Newton's equations along a stored orbit")
    p.add_argument("result")
    p.add_argument("--dense-S", type=int, default=2000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="write full-period samples as CSV or JSON")
    p.add_argument("result")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--samples", type=int, default=200, help="samples per fundamental domain")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("render", help="draw a stored orbit as SVG")
    p.add_argument("result")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print("validation failed:", file=sys.stderr)
        for failure in exc.failures:
            print(f"  - {failure}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SchemaError, IOFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, AliasError, UnsupportedDimension, CollisionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
