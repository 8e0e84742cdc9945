"""``fedmia`` command line: run, first-round-attack, distributions, synth-gen, validate-config."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..exceptions import DataError, FedMIAError
from .config import ConfigError, load_config
from .runner import run_distributions, run_experiment, write_distributions, write_experiment, write_synthetic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

logger = logging.getLogger("fedmia")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON experiment document (default: all defaults)")
    common.add_argument("--seed", type=_u64, help="override master_seed")
    common.add_argument("--out", type=Path, help="output directory (overrides the config's output)")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    parser = argparse.ArgumentParser(
        prog="fedmia",
        description="Federated activity-recognition training watched by a curious server.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="multi-round training under attack, one row per defense setting")
    sub.add_parser("first-round-attack", parents=[common], help="attack trained on the round-1 capture only")
    sub.add_parser("distributions", parents=[common], help="top-1 confidence on own vs other clients' windows")
    sub.add_parser("synth-gen", parents=[common], help="write the configured synthetic corpus to corpus.npz")
    sub.add_parser("validate-config", parents=[common], help="check a config and print it fully resolved")
    return parser


def _configure_logging(quiet: bool) -> None:
    logging.basicConfig(
        level=logging.ERROR if quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _print_summary(rows, quiet: bool) -> None:
    if quiet:
        return
    for r in rows:
        print(
            f"{r['mode']:<12} {r['dataset']} k={r['k']} target={r['target']} defense={r['defense']}: "
            f"attack acc {r['attack_accuracy']:.4f} recall {r['attack_recall']:.4f} | "
            f"HAR test acc {r['har_test_accuracy']:.4f}"
        )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.quiet)
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as e:
        print("error: invalid configuration", file=sys.stderr)
        for line in e.problems:
            print(f"  {line}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg.output)

    try:
        if args.command == "validate-config":
            if not args.quiet:
                print(json.dumps(cfg.resolved(), indent=2, sort_keys=True))
        elif args.command in ("run", "first-round-attack"):
            result = run_experiment(cfg, first_round=args.command == "first-round-attack")
            paths = write_experiment(out, cfg, result)
            _print_summary(result.summary_rows, args.quiet)
            logger.info("wrote %s", ", ".join(str(p) for p in paths))
        elif args.command == "distributions":
            dist = run_distributions(cfg)
            path = write_distributions(out, cfg, dist)
            if not args.quiet:
                print(
                    f"target {dist['target']}: median top-1 own {np.median(dist['own_top1']):.4f} "
                    f"other {np.median(dist['other_top1']):.4f} ({len(dist['own_top1'])} windows each)"
                )
            logger.info("wrote %s", path)
        elif args.command == "synth-gen":
            path = write_synthetic(out, cfg)
            logger.info("wrote %s", path)
    except (DataError, OSError) as e:
        print(f"error: data: {e}", file=sys.stderr)
        return EXIT_DATA
    except (FedMIAError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
