"""Command-line entry points: ``simulate``, ``sweep`` and ``sample``."""

import argparse
import os
import sys
from dataclasses import replace

from . import io
from .errors import DegenerateDynamicsError, ParameterError, PositivityError, SweepError
from .model import sample_initial_population, simulate
from .sweep import run_sweep

PROG = "crowdwise"
WORKERS_ENV = "CROWDWISE_WORKERS"


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one line, no usage dump
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trajectory and write its metric time series")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=_u64, help="override the population seed")
    p.add_argument("--out", help="output CSV (default: output_path from config, else stdout)")

    p = sub.add_parser("sweep", help="run an (alpha, beta) grid and write the heatmap table")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=_positive_int,
                   help=f"worker threads (default: ${WORKERS_ENV}, else 1)")
    p.add_argument("--out")

    p = sub.add_parser("sample", help="write the initial population")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    return parser


def _workers(arg):
    if arg is not None:
        return arg
    env = os.environ.get(WORKERS_ENV)
    if not env:
        return 1
    try:
        return _positive_int(env)
    except (ValueError, argparse.ArgumentTypeError):
        raise ParameterError(f"{WORKERS_ENV}={env!r} is not a positive integer") from None


def _emit(path, emit):
    if path is None:
        emit(sys.stdout)
    else:
        io.write_atomic(path, emit)


def run(args):
    with open(args.config, encoding="utf-8") as fh:
        config = io.parse_config(fh.read(), mode=args.command)
    out = args.out or config.output_path

    if args.command == "simulate":
        spec = config.population
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        record = simulate(spec, config.params, config.truth, config.record_every)
        _emit(out, lambda sink: io.emit_timeseries_csv(record, sink))
    elif args.command == "sweep":
        results = run_sweep(config.grid, workers=_workers(args.workers))
        _emit(out, lambda sink: io.emit_heatmap_csv(results, sink))
    else:
        state = sample_initial_population(config.population)
        _emit(out, lambda sink: io.emit_population_csv(state, sink))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (OSError, io.ConfigError, ParameterError, PositivityError,
            DegenerateDynamicsError, SweepError) as exc:
        msg = " ".join(str(exc).split())
        print(f"{PROG}: error: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, (io.ConfigError, ParameterError)) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
