"""Command line: ``v2xqos run | synth | report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .dataset import DataError, generate_synthetic, write_table


def _run(args) -> int:
    from .charts import emit_charts
    from .runner import emit_report, run_experiment

    config = parse_config(args.config)
    out = Path(args.out) if args.out else config.base_dir / config.output
    report = run_experiment(config, jobs=args.jobs)
    files = emit_report(report, out) + emit_charts(report, out)
    for path in files:
        print(path)
    for pair in report.failed:
        print(f"FAILED {pair.model}/{pair.target}: {pair.error}", file=sys.stderr)
    return 1 if report.failed else 0


def _synth(args) -> int:
    path = write_table(generate_synthetic(args.rows, args.seed), args.out)
    print(path)
    return 0


def _report(args) -> int:
    from .charts import emit_charts
    from .runner import load_report

    for path in emit_charts(load_report(args.input), args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="v2xqos", description="Nested cross-validation benchmark for NR-V2X QoS regressors")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (default: the config's output key)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.set_defaults(func=_run)

    synth = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    synth.add_argument("--rows", type=int, required=True)
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_synth)

    report = sub.add_parser("report", help="re-render charts from a detail file")
    report.add_argument("--in", dest="input", required=True)
    report.add_argument("--out", required=True)
    report.set_defaults(func=_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
