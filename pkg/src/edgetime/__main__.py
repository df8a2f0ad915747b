"""Command-line entry point: ``python -m edgetime <subcommand> [--config F] [--seed S] [--out F]``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import DivergenceError, DomainError
from .experiments import SUBCOMMANDS, ExperimentConfig, parse_config, to_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgetime", description="Edge-learning completion-time experiments.")
    parser.add_argument("command", choices=sorted(SUBCOMMANDS))
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help="CSV output path (default: stdout or the config's output)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise DomainError("seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        text = to_csv(SUBCOMMANDS[args.command](cfg))
    except (DomainError, DivergenceError, OSError) as exc:
        print(f"edgetime: error: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.output
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
