"""Command-line harness: ``analyze``, ``solve``, ``compare`` and ``generate``.

Exit codes: 0 success, 1 solver did not converge, 2 bad input.  Failures
print a JSON object ``{"error": kind, "message": ...}`` on stderr.
"""

import argparse
import json
import sys
from collections import Counter

import numpy as np

from ..analysis import CaseLabel, check_assumption2, derive_constants, predicted_complexities
from ..errors import InstanceError, NotConvergedError, SaddleError, UncertifiedConfigError
from ..idapg import (ToleranceSchedule, dual_constants, epsilon1_gap_bound, idapg_run,
                     theorem3_schedule)
from ..pdpg import PdpgConfig, StoppingRule, pdpg_default_config, pdpg_run
from ..problem import DUAL_ORACLES, PRIMAL_ORACLES, StructuredDualSmooth
from .instances import (InstanceSpec, generate_erm_instance, generate_quadratic_instance,
                        kkt_reference)
from .io import InstanceFormatError, dumps_instance, load_instance

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INPUT = 0, 1, 2

#: Tolerances below this are not attempted by command-line iDAPG runs.
CLI_MIN_EPSILON = 1e-15


class CliError(Exception):
    def __init__(self, kind, message, code=EXIT_INPUT):
        super().__init__(message)
        self.kind = kind
        self.code = code


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, CaseLabel):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _emit(obj, stream=None):
    stream = sys.stdout if stream is None else stream
    stream.write(json.dumps(obj, default=_json_default, sort_keys=True) + "\n")


def _load(args):
    if not args.instance:
        raise CliError("usage", "--instance is required")
    try:
        problem, reference, extras = load_instance(args.instance)
    except FileNotFoundError as exc:
        raise CliError("io", str(exc)) from exc
    except InstanceFormatError as exc:
        raise CliError(exc.kind, str(exc)) from exc
    except InstanceError as exc:
        raise CliError("schema", str(exc)) from exc
    if reference is None:
        # cheap for fully quadratic instances; other instances go without
        try:
            reference = kkt_reference(problem)
        except InstanceError:
            reference = None
    return problem, reference, extras


def _with_mu_phi(problem, mu_phi):
    if mu_phi is None:
        return problem
    from dataclasses import replace

    return replace(problem, declared_mu_phi=mu_phi)


def _start(problem, extras):
    dx, dy = problem.dims
    return extras.get("x0", np.zeros(dx)), extras.get("y0", np.zeros(dy))


def split_counts(counts):
    """Oracle counts grouped into the primal (A) and dual (B) families."""
    counts = Counter(counts)
    return {"A": {k: counts[k] for k in PRIMAL_ORACLES},
            "B": {k: counts[k] for k in DUAL_ORACLES}}


# -- analyze -------------------------------------------------------------------


def analysis_report(problem):
    consts = derive_constants(problem)
    report = {"constants": consts.as_dict(), "case": consts.case.value,
              "mu_phi": consts.mu_phi, "L_phi": consts.L_phi, "dims": list(problem.dims)}
    if isinstance(problem.g1, StructuredDualSmooth):
        ok, witness = check_assumption2(problem)
        report["assumption2"] = {"holds": ok, **witness.__dict__}
    try:
        report["predicted"] = predicted_complexities(consts)
    except ValueError as exc:
        report["predicted"] = None
        report["predicted_note"] = str(exc)
    return report


def cmd_analyze(args):
    problem, _, _ = _load(args)
    _emit(analysis_report(_with_mu_phi(problem, args.mu_phi)))
    return EXIT_OK


# -- solve / compare -----------------------------------------------------------


def _pdpg_config(problem, args):
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise CliError("usage", "--alpha and --beta must be given together")
        try:
            return PdpgConfig(args.alpha, args.beta, args.theta_extrap)
        except ValueError as exc:
            raise CliError("usage", str(exc)) from exc
    try:
        cfg = pdpg_default_config(problem)
    except UncertifiedConfigError as exc:
        raise CliError("uncertified", f"no default PDPG step sizes: {exc}; pass --alpha/--beta") from exc
    if args.theta_extrap:
        cfg = PdpgConfig(cfg.alpha, cfg.beta, args.theta_extrap)
    return cfg


def _idapg_setup(problem, args, y0):
    constants = dual_constants(problem, args.mu_phi)
    if constants.mu_phi > 0:
        gap = epsilon1_gap_bound(problem, y0, constants)
        # y0 already optimal: any positive bound is valid
        schedule = theorem3_schedule(constants, args.c, gap if gap > 0 else 1.0)
    else:
        schedule = ToleranceSchedule(args.epsilon1, args.theta, None)
    return constants, schedule


def run_solver(algo, problem, args, reference, extras):
    """Run one solver; returns ``(trace, converged)``."""
    x0, y0 = _start(problem, extras)
    stop = StoppingRule(args.max_iters, args.tol)
    counter = Counter()
    try:
        if algo == "pdpg":
            trace = pdpg_run(problem, _pdpg_config(problem, args), x0, y0, stop, reference, counter)
        else:
            constants, schedule = _idapg_setup(problem, args, y0)
            trace = idapg_run(problem, constants, schedule, x0, y0, stop, reference, counter,
                              min_epsilon=CLI_MIN_EPSILON)
    except NotConvergedError as exc:
        trace = exc.result
    except (SaddleError, ValueError) as exc:
        raise CliError("solver", str(exc), EXIT_NOT_CONVERGED) from exc
    trace.meta["instance"] = (problem.meta or {}).get("fingerprint")
    trace.meta["oracle_split"] = split_counts(trace.meta.get("oracle_counts", {}))
    return trace, bool(trace.meta.get("converged"))


def _write_trace(trace, args):
    text = trace.dumps_csv() if args.format == "csv" else trace.dumps_jsonl()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _summary(trace):
    m = trace.meta
    return {k: m.get(k) for k in ("algo", "converged", "stop_reason", "iterations",
                                  "inner_iterations_total", "oracle_split", "certified")}


def cmd_solve(args):
    problem, reference, extras = _load(args)
    problem = _with_mu_phi(problem, args.mu_phi)
    trace, converged = run_solver(args.algo, problem, args, reference, extras)
    _write_trace(trace, args)
    if args.out:
        _emit(_summary(trace))
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_compare(args):
    problem, reference, extras = _load(args)
    problem = _with_mu_phi(problem, args.mu_phi)
    report, ok = {}, True
    for algo in ("pdpg", "idapg"):
        trace, converged = run_solver(algo, problem, args, reference, extras)
        report[algo] = _summary(trace)
        ok = ok and converged
    _emit(report)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


# -- generate ------------------------------------------------------------------


def cmd_generate(args):
    try:
        if args.erm:
            p, d = args.erm
            problem, ref = generate_erm_instance(args.seed, p, d, mu=args.ridge, l1_weight=args.l1)
        else:
            spec = InstanceSpec(seed=args.seed, dims=tuple(args.dims), case=args.case,
                                f2="l1" if args.l1 > 0 else "zero",
                                f2_params={"weight": args.l1} if args.l1 > 0 else {})
            problem, ref = generate_quadratic_instance(spec)
    except (InstanceError, ValueError) as exc:
        raise CliError("generate", str(exc)) from exc
    text = dumps_instance(problem, ref, name=args.name) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="saddlekit",
                                     description="Solve and analyse bilinear saddle-point problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--instance", help="instance JSON file")
        p.add_argument("--mu-phi", type=float, default=None,
                       help="declared strong-convexity modulus of the dual function")

    def solver_opts(p):
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--theta-extrap", type=float, default=0.0)
        p.add_argument("--c", type=float, default=2.0, help="schedule constant, > 1")
        p.add_argument("--epsilon1", type=float, default=1.0,
                       help="first tolerance when mu_phi = 0 (uncertified mode)")
        p.add_argument("--theta", type=float, default=0.9,
                       help="tolerance decay when mu_phi = 0 (uncertified mode)")
        p.add_argument("--max-iters", type=int, default=100_000)
        p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("analyze", help="report constants, case and predicted complexities")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="run one solver and write its trace")
    common(p)
    solver_opts(p)
    p.add_argument("--algo", choices=("pdpg", "idapg"), required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run both solvers and report oracle counts")
    common(p)
    solver_opts(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="write a random instance with its reference saddle")
    p.add_argument("--case", default="SC_SC",
                   choices=[c.value for c in (CaseLabel.SC_SC, CaseLabel.SC_FULL_RANK,
                                              CaseLabel.SC_LINEAR, CaseLabel.ASSUMPTION2)])
    p.add_argument("--dims", type=int, nargs=2, default=(10, 8), metavar=("DX", "DY"))
    p.add_argument("--erm", type=int, nargs=2, metavar=("P", "D"),
                   help="ridge regression with P samples and D features")
    p.add_argument("--ridge", type=float, default=1.0)
    p.add_argument("--l1", type=float, default=0.0, help="l1 weight on the primal variable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        _emit({"error": "usage", "message": "invalid command line"}, sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        _emit({"error": exc.kind, "message": str(exc)}, sys.stderr)
        return exc.code
    except OSError as exc:
        _emit({"error": "io", "message": str(exc)}, sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
