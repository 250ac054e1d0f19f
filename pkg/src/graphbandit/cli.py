"""Command-line entry points: run, sweep, ingest and plot.

Usage:
    graphbandit run CONFIG.json [--seeds 1,2,3] [--outdir DIR] [--workers N]
    graphbandit sweep CONFIG.json --n-values 2,5,10 [--seeds ...] [...]
    graphbandit ingest --tags F --interactions F --out ARCHIVE [...]
    graphbandit plot RUNS.csv --out CHART.svg
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from . import bench, ingest
from .bench import RunResult


def _parse_int_list(text):
    return [int(tok) for tok in text.replace(" ", "").split(",") if tok]


def _common_flags(parser):
    parser.add_argument("--seeds", type=_parse_int_list, default=None,
                        help="comma-separated seed list overriding the config")
    parser.add_argument("--outdir", default=None,
                        help="output directory overriding the config")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes for fanning out runs")


def _resolve(config, args):
    if args.seeds is not None:
        config.seeds = args.seeds
    if args.outdir is not None:
        config.output_dir = args.outdir
    return config, Path(config.output_dir)


def cmd_run(args):
    config, outdir = _resolve(bench.load_config(args.config), args)
    results = bench.run_many(config, workers=args.workers)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "runs.csv"
    bench.emit_csv(results, csv_path)
    plot_path, cluster_path = bench.emit_plot(
        bench.group_by_policy(results), outdir / "regret.svg"
    )
    manifest = outdir / "manifest.json"
    bench.write_manifest(manifest, config, [csv_path, plot_path, cluster_path])
    print(f"wrote {csv_path}, {plot_path}, {cluster_path}, {manifest}")
    return 0


def cmd_sweep(args):
    config, outdir = _resolve(bench.load_config(args.config), args)
    rows = bench.sparsity_sweep(config, args.n_values, workers=args.workers)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "sweep.csv"
    bench.emit_sweep_csv(rows, csv_path)
    manifest = outdir / "manifest.json"
    bench.write_manifest(manifest, config, [csv_path])
    for row in rows:
        print(
            f"n={row.n:4d}  final_regret={row.final_regret:.6g}  "
            f"final_nmi={row.final_nmi:.4f}  final_modularity={row.final_modularity:.4f}"
        )
    print(f"wrote {csv_path}, {manifest}")
    return 0


def cmd_ingest(args):
    corpus = ingest.load_tag_corpus(
        args.tags,
        args.interactions,
        user_col=args.user_col,
        item_col=args.item_col,
        tag_col=args.tag_col,
        tag_lookup_path=args.tag_lookup,
    )
    if args.max_users is not None:
        corpus = ingest.subsample_users(corpus, args.max_users, seed=args.seed)
    feats = ingest.featurize(corpus, n_components=args.components, min_count=args.min_count)
    provenance = {
        "min_count": args.min_count,
        "n_components": args.components,
        "max_users": args.max_users,
        "seed": args.seed,
    }
    payload = ingest.write_feature_archive(args.out, feats, corpus, provenance=provenance)
    print(
        f"wrote {args.out}: {payload['n_items']} items x {payload['dimension']} dims, "
        f"{len(payload['user_ids'])} users with positives"
    )
    return 0


def cmd_plot(args):
    """Rebuild per-policy aggregates from a runs.csv and emit charts."""
    traces = {}
    with open(args.csv, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["policy"], int(row["seed"]))
            traces.setdefault(key, []).append(
                (int(row["t"]), float(row["r_t"]), float(row["R_t"]),
                 int(row["cluster_count"]))
            )
    if not traces:
        raise SystemExit(f"no rows found in {args.csv}")
    results = []
    for (policy, seed), rows in traces.items():
        rows.sort()
        results.append(
            RunResult(
                policy=policy,
                seed=seed,
                instant_regret=np.array([r[1] for r in rows]),
                cum_regret=np.array([r[2] for r in rows]),
                cluster_count=np.array([r[3] for r in rows]),
                nmi_trace=None,
                modularity_trace=None,
                choices=np.zeros(len(rows), dtype=int),
                wall_clock_per_1k=[],
            )
        )
    plot_path, cluster_path = bench.emit_plot(bench.group_by_policy(results), args.out)
    print(f"wrote {plot_path}, {cluster_path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graphbandit",
        description="Graph-clustered bandit experiments: run, sweep, ingest, plot.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="JSON experiment config")
    _common_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sparsity sweep over edge budgets n")
    p_sweep.add_argument("config", help="JSON experiment config (synthetic world)")
    p_sweep.add_argument("--n-values", type=_parse_int_list, required=True,
                         help="comma-separated edge budgets, e.g. 2,5,10,20")
    _common_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_ing = sub.add_parser("ingest", help="tag dataset -> feature archive")
    p_ing.add_argument("--tags", required=True, help="tag-assignment TSV")
    p_ing.add_argument("--interactions", required=True, help="interaction TSV")
    p_ing.add_argument("--out", required=True, help="archive path to write")
    p_ing.add_argument("--tag-lookup", default=None, help="tagID -> tagValue TSV")
    p_ing.add_argument("--user-col", default="userID")
    p_ing.add_argument("--item-col", default="itemID")
    p_ing.add_argument("--tag-col", default="tag")
    p_ing.add_argument("--min-count", type=int, default=10)
    p_ing.add_argument("--components", type=int, default=25)
    p_ing.add_argument("--max-users", type=int, default=None)
    p_ing.add_argument("--seed", type=int, default=0)
    p_ing.set_defaults(func=cmd_ingest)

    p_plot = sub.add_parser("plot", help="runs.csv -> SVG charts")
    p_plot.add_argument("csv", help="CSV produced by the run subcommand")
    p_plot.add_argument("--out", required=True, help="SVG path to write")
    p_plot.set_defaults(func=cmd_plot)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
