"""Command line entry point: ``fitroom run | validate | calibrate``.

Exit codes: 0 on success, 2 when a validation test rejects the null
hypothesis or finds different variability, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..fitting_room import InvalidConfig
from ..stats_suite import (
    DEFAULT_ALPHA,
    DEFAULT_VARIANCE_THRESHOLD,
    mann_whitney_u,
    variance_comparison,
)
from .calibration import CalibrationFailed, CalibrationTargets, calibrate
from .config_io import (
    NegativeWaitingTime,
    ParseError,
    ValidationError,
    load_config,
    load_reference_sample,
)
from .experiment import ReplicationError, run_experiment, synthetic_reference
from .report import IoError, emit_report, summary_rows, write_sample_csv

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2

log = logging.getLogger("fitroom")


def _paradigms(value: str) -> tuple[str, ...]:
    value = value.lower()
    if value == "both":
        return ("DES", "ABS")
    if value in ("des", "abs"):
        return (value.upper(),)
    raise argparse.ArgumentTypeError("expected des, abs or both")


def _fractions(value: str) -> tuple[float, float, float]:
    parts = value.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numbers: {value}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fitroom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run replications and validation tests")
    run.add_argument("--config", required=True, help="experiment config (JSON)")
    run.add_argument("--reps", type=int, help="override replications")
    run.add_argument("--seed", type=int, help="override base seed")
    run.add_argument("--paradigm", type=_paradigms, help="des, abs or both")
    run.add_argument("--out", help="write the full JSON report here")
    run.add_argument("--samples", help="directory for per-replication sample CSVs")
    run.add_argument("--reference", help="reference waiting-time CSV (total_wait column)")
    run.add_argument("--synthetic-reference", action="store_true",
                     help="generate the reference from a held-out seed of the scenario")
    run.add_argument("--csv", help="write the summary table (model,mean,std_dev,variance)")
    run.add_argument("--svg", help="write overlaid waiting-time histograms")
    run.add_argument("--workers", type=int, help="parallel worker processes (default: CPU count)")

    val = sub.add_parser("validate", help="compare two waiting-time sample files")
    val.add_argument("--model-samples", required=True)
    val.add_argument("--reference", required=True)
    val.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    val.add_argument("--threshold", type=float, default=DEFAULT_VARIANCE_THRESHOLD,
                     help="variance similarity threshold, percent")

    cal = sub.add_parser("calibrate", help="fit arrival and service rates to targets")
    cal.add_argument("--target-mean-wait", type=float, default=1.68)
    cal.add_argument("--workloads", type=_fractions, default=(0.45, 0.10, 0.45))
    cal.add_argument("--tolerance", type=float, default=0.05)
    cal.add_argument("--max-iterations", type=int, default=40)
    cal.add_argument("--reps", type=int, default=100)
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--config", help="base experiment config whose scenario seeds the search")
    cal.add_argument("--out", help="write the calibrated scenario (JSON) here")
    return parser


def _print_validation(name: str, tests: dict) -> None:
    mw, var = tests.get("mann_whitney"), tests.get("variance")
    if mw:
        verdict = "reject" if mw["reject_null"] else "insufficient evidence to reject"
        print(f"  {name} Mann-Whitney: U={mw['u_statistic']:.1f} p={mw['p_two_sided']:.4f} -> {verdict}")
    if var:
        print(f"  {name} variance: {var['percent_difference']:.1f}% difference -> {var['verdict']}")


def cmd_run(args: argparse.Namespace) -> int:
    spec = load_config(args.config)
    changes = {}
    if args.reps is not None:
        changes["replications"] = args.reps
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.paradigm is not None:
        changes["paradigms"] = args.paradigm
    if args.workers is not None:
        changes["workers"] = args.workers
    if changes:
        spec = spec.replace(**changes)

    reference = None
    if args.reference:
        reference = load_reference_sample(args.reference)
    elif args.synthetic_reference:
        reference = synthetic_reference(spec.scenario, spec.base_seed)

    report = run_experiment(spec, reference, keep_trace=bool(args.samples))
    if args.out:
        emit_report(report, "json", args.out)
    if args.csv:
        emit_report(report, "csv", args.csv)
    if args.svg:
        emit_report(report, "svg_histogram", args.svg)
    if args.samples:
        out = Path(args.samples)
        out.mkdir(parents=True, exist_ok=True)
        for name, block in report.paradigms.items():
            for i, r in enumerate(block.results):
                write_sample_csv(r, out / f"{name.lower()}_rep{i:03d}.csv")

    print("model,mean,std_dev,variance")
    for row in summary_rows(report):
        print(",".join(row))
    if report.validation:
        print("validation:")
        for name, tests in report.validation.items():
            _print_validation(name, tests)
    if report.cross_paradigm and report.cross_paradigm.get("mann_whitney"):
        _print_validation("DES vs ABS", report.cross_paradigm)
    return EXIT_REJECT if report.rejected else EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    model = load_reference_sample(args.model_samples)
    reference = load_reference_sample(args.reference)
    mw = mann_whitney_u(model, reference, args.alpha)
    var = variance_comparison(model, reference, args.threshold)
    _print_validation("model", {"mann_whitney": mw.to_dict(), "variance": var.to_dict()})
    return EXIT_REJECT if (mw.reject_null or var.verdict == "different") else EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    base = load_config(args.config).scenario if args.config else None
    targets = CalibrationTargets(args.target_mean_wait, args.workloads)
    result = calibrate(targets, tolerance=args.tolerance, max_iterations=args.max_iterations,
                       base=base, replications=args.reps, base_seed=args.seed)
    text = json.dumps(result.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(json.dumps({"scenario": result.config.to_dict()}, indent=2))
    print(text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "calibrate": cmd_calibrate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError, InvalidConfig, NegativeWaitingTime, IoError,
            ReplicationError, CalibrationFailed, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
