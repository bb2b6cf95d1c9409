"""Command line entry point: nldd run | list | check."""

import argparse
import json
import os
import subprocess
import sys

from .errors import InvalidOverride, UnknownExperiment
from .harness import experiment_names, run_experiment


def _build_parser():
    p = argparse.ArgumentParser(prog="nldd",
                                description="Nonlinear DN experiment runner")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write CSVs")
    run.add_argument("experiment", help="experiment name (see: nldd list)")
    run.add_argument("--h", type=float, default=None, help="mesh size override")
    run.add_argument("--theta", type=float, default=None,
                     help="relaxation parameter override")
    run.add_argument("--alpha", type=float, default=None,
                     help="nonlinearity strength override")
    run.add_argument("--out", default="results", help="output directory")

    sub.add_parser("list", help="list available experiments")
    sub.add_parser("check", help="run the acceptance suite (pytest)")
    return p


def _find_acceptance_tests():
    here = os.path.dirname(os.path.abspath(__file__))
    candidates = [
        os.path.join(os.getcwd(), "tests", "test_acceptance.py"),
        os.path.normpath(os.path.join(here, "..", "..", "tests",
                                      "test_acceptance.py")),
    ]
    for c in candidates:
        if os.path.exists(c):
            return c
    return None


def main(argv=None):
    args = _build_parser().parse_args(argv)

    if args.command == "list":
        for name in experiment_names():
            print(name)
        return 0

    if args.command == "check":
        target = _find_acceptance_tests()
        if target is None:
            print('error: {"reason": "tests/test_acceptance.py not found"}',
                  file=sys.stderr)
            return 2
        return subprocess.call([sys.executable, "-m", "pytest", "-q", "-s", target])

    overrides = {k: getattr(args, k) for k in ("h", "theta", "alpha")
                 if getattr(args, k) is not None}
    try:
        result = run_experiment(args.experiment, overrides, out_dir=args.out)
    except (UnknownExperiment, InvalidOverride) as exc:
        print(f'error: {json.dumps({"reason": str(exc)})}', file=sys.stderr)
        return 2
    out = os.path.join(args.out, args.experiment)
    print(f"wrote {len(result.csv_paths)} CSV file(s) and manifest.json to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
