"""Command-line entry point: ``rasster {plan,map,sweep,diagnose}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .errors import RassterError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rasster", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes for trials")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common], help="emit frequency plans as JSON + CSV")
    sub.add_parser("map", parents=[common], help="single-realization detection map")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo hit-rate sweep")
    sub.add_parser("diagnose", parents=[common], help="coherence, spark and bound report")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = ex.load_config(args.config, seed=args.seed)
        out: Path = args.out
        if args.command == "plan":
            for path in ex.emit_plans(cfg, out):
                print(path)
        elif args.command == "map":
            rows, summary = ex.run_detection_map(cfg)
            print(ex.write_text(out / "detections.csv", ex.detections_to_csv(rows)))
            print(ex.write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"))
        elif args.command == "sweep":
            rows = ex.run_hit_rate_sweep(cfg, threads=args.threads)
            print(ex.write_text(out / "hit_rates.csv", ex.sweep_to_csv(rows)))
        elif args.command == "diagnose":
            rows = ex.run_diagnostics(cfg)
            print(ex.write_text(out / "diagnostics.csv", ex.diagnostics_to_csv(rows)))
    except (RassterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
