"""Command line entry point.

Subcommands: solve, oracle, evaluate, validate.  Exit codes: 0 success,
2 configuration or validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import ConfigInvalid, RobustImpulseError
from .harness import load_config, run, run_evaluate, run_oracle, run_validate


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robust-impulse")
    sub = p.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run the solver and write reports")
    solve.add_argument("--config", required=True)
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--out", default=None)

    oracle = sub.add_parser("oracle", help="tree oracle values as CSV")
    oracle.add_argument("--config", required=True)

    ev = sub.add_parser("evaluate", help="evaluate a strategy file")
    ev.add_argument("--config", required=True)
    ev.add_argument("--strategy", required=True)
    ev.add_argument("--seed", type=int, default=None)

    val = sub.add_parser("validate", help="spot-check problem invariants")
    val.add_argument("--config", required=True)
    val.add_argument("--probes", type=int, default=10_000)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.command == "solve":
            report, _, _ = run(cfg, out_dir=args.out)
            print(f"y0={report['y0']:.6g} se={report['se']:.3g} "
                  f"k_used={report['k_used']}")
            return 0
        if args.command == "oracle":
            print("budget,value")
            for r, v in run_oracle(cfg):
                print(f"{r},{v!r}")
            return 0
        if args.command == "evaluate":
            print(json.dumps(run_evaluate(cfg, args.strategy), indent=2))
            return 0
        if args.command == "validate":
            report = run_validate(cfg, n_probe=args.probes)
            print(report.summary())
            return 0 if report.passed else 2
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RobustImpulseError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
