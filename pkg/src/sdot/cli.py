"""Command line front end: ``sdot {solve,verify,bounds,oracle} CONFIG``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .bounds import BoundsError, compute_bounds
from .config import ConfigError, parse_config
from .cost import CostError, verify_conditions
from .geometry import GeometryError
from .oracle import OracleError, audit
from .partition import PartitionError, write_assignment_csv, write_pgm
from .scheme import (ResolutionError, SchemeAbort, SchemeConfig, SchemeError, run_scheme,
                     verify_error_bound, write_results_csv)

EXIT_OK, EXIT_VALIDATION, EXIT_ABORT, EXIT_CERTIFICATE = 0, 2, 3, 4
MTW_WEAK_TOLERANCE = 1e-4

log = logging.getLogger("sdot")


def _say(tag, message, stream=None):
    print(f"[{tag}] {message}", file=stream or sys.stdout)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _emit_bounds(problem, epsilon, out, observed=None):
    """Write bounds.csv whenever the constants can be computed at all."""
    try:
        report = compute_bounds(problem, epsilon)
    except (BoundsError, ValueError) as exc:
        _say("bounds", f"could not compute bound constants: {exc}", sys.stderr)
        return None
    report.observed_outer_iterations = observed
    report.write_csv(out / "bounds.csv")
    return report


def _oracle_audit(cfg, problem, partition, out, prefix=""):
    if len(problem.measure.masses) > cfg.oracle.max_atoms:
        _say("oracle", f"skipped: {len(problem.measure.masses)} atoms exceed the cap of "
             f"{cfg.oracle.max_atoms}; set oracle.resolution to compare on a coarser grid")
        return None
    rep = audit(problem, partition)
    rep.write_csv(out / f"{prefix}oracle.csv")
    rep.matched_plan.write_csv(out / f"{prefix}plan_cell_masses.csv")
    rep.prescribed_plan.write_csv(out / f"{prefix}plan_prescribed.csv")
    m, p = rep.matched, rep.prescribed
    _say("oracle", f"cell-mass LP: relative gap {m.relative_gap:.3g}, disagreement "
         f"{m.disagreement_fraction:.3g}, out of band {m.out_of_band}")
    _say("oracle", f"prescribed-mass LP: relative gap {p.relative_gap:.3g}, "
         f"mass discrepancy {p.mass_discrepancy:.3g}")
    return rep


def _oracle_ok(cfg, rep):
    m = rep.matched
    return abs(m.relative_gap) <= cfg.oracle.max_relative_gap and m.out_of_band <= cfg.oracle.max_out_of_band


def cmd_solve(cfg, out, strict=False, oracle=True):
    problem = cfg.build_problem()
    try:
        result = run_scheme(problem, cfg.scheme)
    except ResolutionError as exc:
        _say("scheme", str(exc), sys.stderr)
        return EXIT_VALIDATION
    except SchemeError as exc:
        _say("scheme", f"aborted: {exc}", sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace is not None:
            trace.write_csv(out / "trace.csv")
        observed = trace.outer_iterations if trace is not None else None
        _emit_bounds(problem, cfg.epsilon, out, observed)
        return EXIT_ABORT
    write_results_csv(result, problem.targets, out / "results.csv")
    result.trace.write_csv(out / "trace.csv")
    write_assignment_csv(problem, result.partition, out / "assignment.csv")
    write_pgm(problem, result.partition, out / "assignment.pgm")
    result.bounds.write_csv(out / "bounds.csv")
    f = problem.targets.masses
    ok = verify_error_bound(result.masses, f, cfg.epsilon)
    _say("scheme", f"masses {np.array2string(result.masses, precision=5)}; "
         f"max |alpha - f| = {np.max(np.abs(result.masses - f)):.3g} (epsilon {cfg.epsilon:g}); "
         f"{result.trace.outer_iterations} outer iterations, "
         f"{result.trace.mass_evaluations} mass evaluations")
    status = EXIT_OK if ok else EXIT_ABORT
    cert = result.bounds.passed
    if cert is False:
        _say("bounds", f"certificate FAILED: {result.trace.outer_iterations} > {result.bounds.n_eps_bound:.6g}")
        if strict:
            status = max(status, EXIT_CERTIFICATE)
    elif cert:
        _say("bounds", f"certificate ok: {result.trace.outer_iterations} <= {result.bounds.n_eps_bound:.6g}")
    if oracle and cfg.oracle.enabled:
        rep = _oracle_audit(cfg, problem, result.partition, out)
        if rep is not None and not _oracle_ok(cfg, rep) and strict:
            status = max(status, EXIT_CERTIFICATE)
    return status


def condition_failures(report):
    """Names of failed checks; a zero MTW constant (within tolerance) is not a failure."""
    failed = []
    for name, value, _, ok in report.rows():
        if name == "mtw_delta0_estimate":
            if value is None or value < -MTW_WEAK_TOLERANCE:
                failed.append(name)
        elif name == "mtw_unreliable_samples":
            continue
        elif ok is False:
            failed.append(name)
    return failed


def cmd_verify(cfg, out, strict=False, seed=0):
    domain = cfg.build_domain()
    cost = cfg.build_cost(domain)
    target = cfg.build_target_domain()
    targets = cost.target_chart.to_chart(cfg.points)
    report = verify_conditions(cost, domain, target, targets, cfg.check_samples, seed)
    _write_rows(out / "conditions.csv", ["check", "value", "threshold", "pass"], report.rows())
    for name, value, threshold, ok in report.rows():
        _say("cost", f"{name:32s} {value!s:>24s}  threshold {threshold!s:>8s}  "
             f"{'pass' if ok else 'FAIL' if ok is False else '-'}")
    failed = condition_failures(report)
    if failed:
        _say("cost", "failed checks: " + ", ".join(failed))
        return EXIT_CERTIFICATE if strict else EXIT_OK
    return EXIT_OK


def cmd_bounds(cfg, out):
    problem = cfg.build_problem()
    report = _emit_bounds(problem, cfg.epsilon, out)
    if report is None:
        return EXIT_VALIDATION
    for name in ("C", "M", "Lambda", "delta", "sup_I", "sigma_max", "n_eps_bound"):
        _say("bounds", f"{name:12s} {getattr(report, name):.6g}")
    return EXIT_OK


def cmd_oracle(cfg, out):
    o = cfg.oracle
    resolution = o.resolution or cfg.resolution
    problem = cfg.build_problem(resolution)
    if len(problem.measure.masses) > o.max_atoms:
        need = int(np.floor(resolution * np.sqrt(o.max_atoms / len(problem.measure.masses))))
        _say("oracle", f"{len(problem.measure.masses)} atoms exceed the cap of {o.max_atoms}; "
             f"use oracle.resolution <= {need}", sys.stderr)
        return EXIT_VALIDATION
    eps = o.epsilon or cfg.epsilon
    scheme = SchemeConfig(eps, cfg.scheme.bisection_tolerance, cfg.scheme.max_outer_iterations,
                          o.resolution_factor or cfg.scheme.resolution_factor)
    try:
        result = run_scheme(problem, scheme)
    except ResolutionError as exc:
        _say("oracle", f"scheme refused the oracle grid: {exc}", sys.stderr)
        return EXIT_VALIDATION
    except SchemeError as exc:
        _say("scheme", f"aborted: {exc}", sys.stderr)
        return EXIT_ABORT
    rep = _oracle_audit(cfg, problem, result.partition, out)
    return EXIT_OK if _oracle_ok(cfg, rep) else EXIT_CERTIFICATE


def build_parser():
    p = argparse.ArgumentParser(prog="sdot", description="Semi-discrete transport by weight adjustment.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "run the weight adjustment and write all artifacts"),
                       ("verify", "numerical checks of the cost conditions"),
                       ("bounds", "constants of the iteration bound"),
                       ("oracle", "compare against an exact discrete solve")):
        s = sub.add_parser(name, help=text)
        s.add_argument("config", type=Path)
        s.add_argument("--out", type=Path, default=None, help="output directory (default from config)")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--strict", action="store_true", help="certificate or check failures give exit 4")
        s.add_argument("--no-oracle", action="store_true", help="skip the exact comparison in solve")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        _say("config", str(exc), sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        _say("config", f"cannot read {args.config}: {exc}", sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "solve":
            return cmd_solve(cfg, out, args.strict, not args.no_oracle)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.strict, cfg.seed)
        if args.command == "bounds":
            return cmd_bounds(cfg, out)
        return cmd_oracle(cfg, out)
    except (GeometryError, PartitionError) as exc:
        _say("geometry", str(exc), sys.stderr)
        return EXIT_VALIDATION
    except CostError as exc:
        _say("cost", str(exc), sys.stderr)
        return EXIT_VALIDATION
    except OracleError as exc:
        _say("oracle", str(exc), sys.stderr)
        return EXIT_ABORT
    except SchemeAbort as exc:
        _say("scheme", str(exc), sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
