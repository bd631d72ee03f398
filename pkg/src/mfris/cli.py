"""Command-line harness: run scenario sweeps, summarize results (CSV plus a
rendered figure), and run the small-instance exhaustive oracle check."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .bench import (manifest, oracle_check, parse_scenario, read_results_csv,
                    rows_to_csv, run_scenario, summarize, summary_to_csv)
from .core import ConfigError, MfrisError
from .plots import plot_summary


def _cmd_run(args) -> int:
    scenario = parse_scenario(args.scenario)
    if args.trials is not None:
        scenario = replace(scenario, n_trials=args.trials)
    if args.seed is not None:
        scenario = replace(scenario, base_seed=args.seed)
    rows = run_scenario(scenario, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, f"{scenario.name}_results.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(rows_to_csv(rows, scenario.n_users))
    manifest_path = os.path.join(args.out, f"{scenario.name}_manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest(scenario, rows), fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"wrote {len(rows)} rows ({n_failed} failed) to {csv_path}")
    print(f"wrote manifest to {manifest_path}")
    if n_failed == len(rows):
        print("error: every cell failed", file=sys.stderr)
        return 1
    return 0


def _cmd_summarize(args) -> int:
    rows, _ = read_results_csv(args.csv)
    summary = summarize(rows)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.csv))
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.csv))[0]
    csv_path = os.path.join(out_dir, f"{stem}_summary.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(summary_to_csv(summary))
    fig_path = os.path.join(out_dir, f"{stem}_summary.png")
    plot_summary(summary, fig_path, title=rows[0]["scenario"] if rows else None)
    for row in summary:
        if row["n_ok"] == 0:
            print(f"warning: group ({row['architecture']}, {row['sweep_value']}) "
                  f"has no successful rows", file=sys.stderr)
        else:
            print(f"{row['architecture']:12s} {row['sweep_var']}={row['sweep_value']:g} "
                  f"mean={row['mean_sum_rate']:.4f} std={row['std_sum_rate']:.4f} "
                  f"n={row['n_ok']}")
    print(f"wrote {csv_path}")
    print(f"wrote {fig_path}")
    return 0


def _cmd_oracle_check(args) -> int:
    scenario = parse_scenario(args.scenario)
    results = oracle_check(scenario)
    worst = min(r["ratio"] for r in results)
    violations = [r for r in results if r["ao"] > r["oracle"] + 1e-9]
    for r in results:
        print(f"seed={r['seed']} oracle={r['oracle']:.6f} ao={r['ao']:.6f} "
              f"ratio={r['ratio']:.4f}")
    print(f"worst AO/oracle ratio: {worst:.4f}")
    if violations:
        print("error: AO exceeded the exhaustive oracle", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfris",
        description="Monte Carlo benchmark harness for RIS architecture comparisons")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario sweep")
    p_run.add_argument("scenario", help="scenario config file")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--trials", type=int, default=None,
                       help="override the scenario trial count")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario base seed")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="concurrent worker processes")
    p_run.set_defaults(func=_cmd_run)

    p_sum = sub.add_parser("summarize", help="summarize a results CSV")
    p_sum.add_argument("csv", help="results CSV from 'run'")
    p_sum.add_argument("--out", default=None, help="output directory")
    p_sum.set_defaults(func=_cmd_summarize)

    p_oracle = sub.add_parser("oracle-check",
                              help="compare AO against exhaustive search")
    p_oracle.add_argument("scenario", help="small-instance scenario file")
    p_oracle.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MfrisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
