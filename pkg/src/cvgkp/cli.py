"""Command-line entry point: ``cvgkp <experiment> --config <path>``.

Exit codes: 0 on success, 1 when the report cannot be written, 2 on a
configuration or usage error, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from cvgkp import __version__
from cvgkp.exceptions import ConfigError, NumericalError
from cvgkp.experiments import EXPERIMENTS, build_config, load_config, run_experiment

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvgkp", description="Run a GKP / cluster-state benchmark and emit CSV.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="flat key = value settings file")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--trials", type=int, help="overrides the config trial count")
    parser.add_argument("--workers", type=int, help="threads for Monte Carlo blocks; does not change results")
    parser.add_argument("--out", help="write the CSV here instead of stdout")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = dict(seed=args.seed, trials=args.trials, workers=args.workers, output_path=args.out)
    try:
        if args.config:
            config = load_config(args.config, args.experiment, **overrides)
        else:
            config = build_config(args.experiment, {}, **overrides)
        text = run_experiment(config)
    except ConfigError as exc:
        where = f" [{exc.key}]" if exc.key else ""
        print(f"cvgkp: config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"cvgkp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"cvgkp: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
