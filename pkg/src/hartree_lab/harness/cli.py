"""``hartree-lab <experiment> [--config FILE] [--out DIR] [--threads N] [--tol key=val ...]``."""

import argparse
import sys

from ..errors import LabError
from .config import EXPERIMENTS, load_config
from .experiments import run_experiment


def _tolerance(text: str):
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key!r}: {val!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hartree-lab", description="Run a configured experiment and write its report.")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config merged over the defaults")
        p.add_argument("--out", help="output directory (manifest, CSV, PNG)")
        p.add_argument("--threads", type=int, help="worker threads for sweeps")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="KEY=VAL",
                       help="override a tolerance")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.tol:
        overrides["tolerances"] = dict(args.tol)
    try:
        cfg = load_config(args.config, args.experiment, overrides)
        report = run_experiment(cfg, out=args.out)
    except LabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:40s} {c.value:.6g}  ({c.tolerance})")
    print(f"{report.experiment}: {'all checks passed' if report.passed else 'FAILED'} in {report.wall_time:.1f}s")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
