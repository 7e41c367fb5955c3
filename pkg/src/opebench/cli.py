"""Command-line driver.

Subcommands::

    opebench synth          --config cfg.yaml [--out DIR] [--workers N]
    opebench classification --config cfg.yaml [--out DIR] [--workers N]
    opebench realworld      --config cfg.yaml [--out DIR] [--workers N]
    opebench report         --errors-csv squared_errors.csv [--z-max X]
                            [--cvar-alpha A] [--out DIR] [--drop-flagged]

The first three run a sweep and write ``squared_errors.csv``,
``summary.csv``, ``cdf_points.csv``, and ``cdf.svg`` into the output
directory (``--out``, else the config's ``outputs.directory``, else
``$OPEBENCH_OUT_DIR``). ``report`` re-scores an existing squared-error file
under new settings without re-running anything.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimator
failure under ``--fail-fast``.
"""

import argparse
import sys

from .config import load_config, resolve_out_dir
from .errors import ConfigError, DataError, EstimatorError
from .experiments import run_experiment, write_report
from .io import load_squared_errors_csv, summarize

MODE_OF_COMMAND = {
    "synth": "synthetic",
    "classification": "classification",
    "realworld": "realworld",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opebench",
        description="Robustness benchmarking of off-policy evaluation estimators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for command in MODE_OF_COMMAND:
        p = sub.add_parser(command, help=f"run a {MODE_OF_COMMAND[command]} sweep")
        p.add_argument("--config", required=True, help="experiment config (YAML)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel seed workers (does not affect results)")
        p.add_argument("--fail-fast", action="store_true",
                       help="abort on the first estimator failure")

    rep = sub.add_parser("report", help="re-score an existing run")
    rep.add_argument("--errors-csv", required=True,
                     help="path to a squared_errors.csv from a previous run")
    rep.add_argument("--z-max", type=float, default=None,
                     help="AU-CDF cutoff (default: 99th pct of pooled errors)")
    rep.add_argument("--cvar-alpha", type=float, default=0.7)
    rep.add_argument("--out", default=None, help="output directory")
    rep.add_argument("--drop-flagged", action="store_true",
                     help="exclude flagged (failed) records from the scores")
    return parser


def _run_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    expected_mode = MODE_OF_COMMAND[args.command]
    if cfg.mode != expected_mode:
        raise ConfigError(
            f"config mode is {cfg.mode!r} but the {args.command!r} subcommand "
            f"expects {expected_mode!r}"
        )
    out_dir = resolve_out_dir(args.out, cfg.outputs.directory)
    results, scores, z_max = run_experiment(
        cfg, workers=args.workers, out_dir=out_dir, fail_fast=args.fail_fast
    )
    n_records = len(results.records)
    n_flagged = sum(s.n_flagged for s in scores.values())
    print(f"wrote {n_records} records for {len(scores)} estimators to {out_dir}")
    print(f"z_max={z_max!r}, flagged records: {n_flagged}")
    return 0


def _run_report(args: argparse.Namespace) -> int:
    results = load_squared_errors_csv(args.errors_csv)
    scores, z_max = summarize(
        results,
        z_max=args.z_max,
        cvar_alpha=args.cvar_alpha,
        drop_flagged=args.drop_flagged,
    )
    out_dir = resolve_out_dir(args.out, None)
    write_report(results, scores, z_max, out_dir, args.drop_flagged)
    print(f"re-scored {len(results.records)} records into {out_dir} "
          f"(z_max={z_max!r}, cvar_alpha={args.cvar_alpha})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return _run_report(args)
        return _run_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except EstimatorError as exc:
        print(f"estimator failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
