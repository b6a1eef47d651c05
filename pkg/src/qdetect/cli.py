"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 numerical non-convergence (1 is
reserved for a failed certificate in ``verify``).
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys

import numpy as np

from . import io
from .average import design_average, effective_states
from .random_states import RandomStateSampler, mc_detection_probability
from .robust import design_worst_case
from .scenarios import MAXIMALLY_MIXED, evaluate, q_sweep
from .solver import (
    DEFAULT_TOL,
    DetectionProblem,
    solve_nominal,
    verify_nominal_certificate,
    verify_worst_case_certificate,
)

EXIT_OK = 0
EXIT_CERT_FAIL = 1
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3

CERT_TOL = 1e-6


def _print_povm(ops: np.ndarray, out):
    for i, op in enumerate(ops):
        print(f"Pi_{i}:", file=out)
        for row in op:
            print("  " + "  ".join(f"{z.real:+.10f}{z.imag:+.10f}j" for z in row), file=out)


def _print_report(report, out):
    for line in report.lines():
        print("  " + line, file=out)
    print(f"certificate: {'PASS' if report.passed else 'FAIL'} at tol {report.tol:g}", file=out)


def cmd_design(args, out=sys.stdout) -> int:
    ens = io.read_ensemble(args.ensemble)
    tol = args.tol
    if args.criterion == "worst":
        design = design_worst_case(ens, tol)
        cert = design.certificate
        report = verify_worst_case_certificate(ens, cert.povm, cert.bounds, cert.dual, CERT_TOL)
        print("criterion: worst", file=out)
        print(f"regime: {design.regime.value}", file=out)
        print(f"value: {design.worst_case_value:.12g}", file=out)
        print(f"threshold margin: {design.threshold_margin:.6g}", file=out)
        if design.program_value is not None:
            print(f"explicit program value: {design.program_value:.12g}", file=out)
        ops, dual, value, bounds = cert.povm.operators, cert.dual, design.worst_case_value, cert.bounds
        converged = design.converged
        regime = design.regime.value
    else:
        if args.criterion == "nominal":
            problem = DetectionProblem(ens.states, ens.priors)
        else:
            problem = effective_states(ens).problem()
        sol = solve_nominal(problem, tol) if args.criterion == "nominal" else design_average(ens, tol)
        report = verify_nominal_certificate(problem, sol.povm, sol.dual, CERT_TOL)
        print(f"criterion: {args.criterion}", file=out)
        print(f"value: {sol.value:.12g}", file=out)
        print(f"duality gap: {sol.gap:.3e}", file=out)
        ops, dual, value, bounds, regime = sol.povm.operators, sol.dual, sol.value, None, None
        converged = sol.converged
    _print_povm(ops, out)
    _print_report(report, out)
    if args.solution:
        io.write_solution(args.solution, args.criterion, ops, dual, value, bounds, regime)
    if not converged:
        print("solver did not converge; best iterate shown", file=out)
        return EXIT_NONCONVERGED
    return EXIT_OK if report.passed else EXIT_NONCONVERGED


def cmd_verify(args, out=sys.stdout) -> int:
    ens = io.read_ensemble(args.ensemble)
    sol = io.read_solution(args.solution)
    if sol["povm"].shape != ens.states.shape:
        raise io.InputError(
            f"solution has shape {sol['povm'].shape}, ensemble needs {ens.states.shape}"
        )
    crit = sol["criterion"]
    if crit == "worst":
        bounds = sol.get("bounds")
        if bounds is None:
            raise io.InputError(f"{args.solution}: bounds: required for the worst criterion")
        report = verify_worst_case_certificate(ens, sol["povm"], bounds, sol["dual"], args.tol)
    else:
        problem = (DetectionProblem(ens.states, ens.priors) if crit == "nominal"
                   else effective_states(ens).problem())
        report = verify_nominal_certificate(problem, sol["povm"], sol["dual"], args.tol)
    print(f"criterion: {crit}", file=out)
    _print_report(report, out)
    return EXIT_OK if report.passed else EXIT_CERT_FAIL


def cmd_sweep(args, out=sys.stdout) -> int:
    ens = io.read_ensemble(args.ensemble)
    rows = q_sweep(ens, args.q_from, args.q_to, args.step, tol=args.tol, workers=args.workers)
    io.write_sweep_csv(rows, args.out)
    bad = [r for r in rows if r.status != "ok"]
    print(f"wrote {len(rows)} rows to {args.out} ({len(bad)} flagged)", file=out)
    return EXIT_NONCONVERGED if bad else EXIT_OK


def cmd_mc(args, out=sys.stdout) -> int:
    ens = io.read_ensemble(args.ensemble)
    if args.samples < 100:
        raise io.InputError("--samples: need at least 100")
    sol = design_average(ens, args.tol)
    analytic = evaluate(sol.povm, ens, MAXIMALLY_MIXED)
    est = mc_detection_probability(sol.povm, ens, RandomStateSampler(ens.dim, args.seed), args.samples)
    agree = est.agrees_with(analytic, 3.0, floor=1e-12)
    print(f"average design value: {sol.value:.12g}", file=out)
    print(f"analytic (maximally mixed): {analytic:.12g}", file=out)
    print(f"monte carlo: {est.mean:.12g} +/- {est.standard_error:.3e} ({est.samples} samples, seed {args.seed})",
          file=out)
    print(f"agreement within 3 se: {'yes' if agree else 'NO'}", file=out)
    if not sol.converged:
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_example(args, out=sys.stdout) -> int:
    shutil.copyfile(io.example_path(), args.out)
    print(f"wrote {args.out}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdetect",
        description="Minimum-error measurements for partially known quantum states.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="compute an optimal measurement")
    p.add_argument("ensemble")
    p.add_argument("solution", nargs="?", help="write the solution (POVM + certificate) here")
    p.add_argument("--criterion", choices=("nominal", "worst", "average"), default="nominal")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("verify", help="check the optimality certificate of a solution file")
    p.add_argument("ensemble")
    p.add_argument("solution")
    p.add_argument("--tol", type=float, default=CERT_TOL)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="sweep a uniform mixing bound and write CSV")
    p.add_argument("ensemble")
    p.add_argument("out")
    p.add_argument("--q-from", type=float, default=0.0)
    p.add_argument("--q-to", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mc", help="Monte Carlo check of the average design")
    p.add_argument("ensemble")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("example", help="write the bundled three-state qutrit ensemble")
    p.add_argument("out")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out=out)
    except io.InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
