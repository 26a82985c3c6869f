"""Command-line interface: benchmark runs and sweeps, contour export, synth data.

    otcp bench run --config cfg.json [--output-dir DIR]
    otcp bench sweep --config cfg.json [--eps ...] [--targets ...]
    otcp contour --model model.json --x ... --alphas ... [--out DIR]
    otcp synth --kind gaussian --n 1000 --d 2 --seed 0 --out data.csv

Exit codes: 0 on success, 2 when some benchmark methods failed while others
completed (a partial report is still written).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench, serialize
from .data import synth_dataset, write_dataset_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otcp", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="benchmark harness")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p_run = bench_sub.add_parser("run", help="run the configured benchmark")
    p_run.add_argument("--config", required=True, help="JSON config file")
    p_run.add_argument("--output-dir", default=None, help="override the config output dir")

    p_sweep = bench_sub.add_parser("sweep", help="epsilon x grid-size ablation")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--eps", nargs="+", type=float, default=None,
                         help=f"epsilon values (default {list(bench.DEFAULT_SWEEP_EPSILONS)})")
    p_sweep.add_argument("--targets", nargs="+", type=int, default=None,
                         help=f"grid sizes m (default {list(bench.DEFAULT_SWEEP_TARGETS)})")
    p_sweep.add_argument("--output-dir", default=None)

    p_contour = sub.add_parser("contour", help="export 2-D region polygons")
    p_contour.add_argument("--model", required=True, help="saved predictor JSON")
    p_contour.add_argument("--x", nargs="+", type=float, required=True,
                           help="query feature vector (one point)")
    p_contour.add_argument("--alphas", nargs="+", type=float, default=[0.1])
    p_contour.add_argument("--out", default="contours")
    p_contour.add_argument("--angles", type=int, default=128)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset CSV")
    p_synth.add_argument("--kind", choices=["gaussian", "banana", "mixture"],
                         default="gaussian")
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--d", type=int, default=2)
    p_synth.add_argument("--p", type=int, default=1)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    return parser


def _cmd_bench_run(args) -> int:
    cfg = bench.BenchConfig.from_json_file(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    report = bench.run_benchmark(cfg)
    for method, agg in sorted(report.aggregates().items()):
        cov = agg.get("coverage", {})
        size = agg.get("mean_region_size", {})
        print(f"{method}: coverage {cov.get('mean', float('nan')):.4f} "
              f"+/- {cov.get('stderr', float('nan')):.4f}, "
              f"size {size.get('mean', float('nan')):.4f} "
              f"+/- {size.get('stderr', float('nan')):.4f} "
              f"({agg['n_seeds']} seeds, {agg['n_failed']} failed)")
    if cfg.output_dir:
        print(f"report written to {cfg.output_dir}")
    return 2 if report.any_failed else 0


def _cmd_bench_sweep(args) -> int:
    cfg = bench.BenchConfig.from_json_file(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    records = bench.sweep(cfg, args.eps, args.targets)
    failed = any(r["status"] != "ok" for r in records)
    cells = sorted({(r["epsilon"], r["m"]) for r in records})
    for eps, m in cells:
        sizes = [r["mean_region_size"] for r in records
                 if r["epsilon"] == eps and r["m"] == m and r["status"] == "ok"]
        med = float(np.median(sizes)) if sizes else float("nan")
        print(f"eps={eps:g} m={m}: median size {med:.4f} over {len(sizes)} seeds")
    if cfg.output_dir:
        print(f"sweep written to {cfg.output_dir}/sweep.csv")
    return 2 if failed else 0


def _cmd_contour(args) -> int:
    pred = serialize.load_predictor(args.model)
    paths = bench.export_contours(pred, [args.x], args.alphas, args.out,
                                  n_angles=args.angles)
    for path in paths:
        print(path)
    return 0


def _cmd_synth(args) -> int:
    ds = synth_dataset(args.kind, args.n, args.d, {"p": args.p}, seed=args.seed)
    write_dataset_csv(ds, args.out)
    print(f"wrote {ds.n} rows (p={ds.p}, d={ds.d}) to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench":
        if args.bench_command == "run":
            return _cmd_bench_run(args)
        return _cmd_bench_sweep(args)
    if args.command == "contour":
        return _cmd_contour(args)
    return _cmd_synth(args)


if __name__ == "__main__":
    sys.exit(main())
