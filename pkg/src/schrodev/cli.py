"""Command-line entry point.

Subcommands mirror the experiment kinds; each takes --config, --seed,
--out, --threads.  The config's experiment block must match the chosen
subcommand.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import run_experiment

_SUBCOMMANDS = {
    "simulate": "simulate",
    "skeleton": "skeleton",
    "rate": "rate",
    "tail-scan": "tail_scan",
    "fw-check": "fw_check",
    "lil": "lil",
    "modulus": "modulus",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schrodev",
        description="Moderate-deviation and iterated-logarithm experiments "
                    "for a stochastic linear Schrodinger equation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1, help="worker count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = _SUBCOMMANDS[args.command]
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if cfg["experiment"]["kind"] != kind:
        print(f"config error: /experiment/kind: expected {kind!r} for this "
              f"subcommand, got {cfg['experiment']['kind']!r}", file=sys.stderr)
        return 1
    try:
        return run_experiment(cfg, seed_override=args.seed, out_override=args.out,
                              threads=args.threads)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
