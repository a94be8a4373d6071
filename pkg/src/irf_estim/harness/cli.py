"""Command-line entry point ``irf-estim``."""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError, DomainError, NumericalError
from .config import EXPERIMENTS, load_config
from .experiments import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="irf-estim", description="Run a phase-estimation or beamforming experiment.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="TOML/JSON config, or a result CSV whose config echo is replayed")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="output CSV (stdout if omitted)")
    p.add_argument("--threads", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, args.experiment, seed=args.seed, trials=args.trials)
        table = run_experiment(cfg, threads=args.threads)
        if args.out:
            table.write(args.out)
        else:
            sys.stdout.write(table.to_csv())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
