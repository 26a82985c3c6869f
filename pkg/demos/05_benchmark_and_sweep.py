"""Seeded benchmark runs and the epsilon/grid-size ablation, library-side.

The same operations back the CLI:

    otcp bench run --config cfg.json
    otcp bench sweep --config cfg.json --eps 0.05 0.2 --targets 512 1024

Reports are long-format CSV plus a JSON summary; rerunning a config
reproduces the CSV byte-for-byte apart from the timing columns.
"""

import json
from pathlib import Path

import numpy as np

from otcp import BenchConfig, run_benchmark, sweep

out = Path(__file__).parent / "out" / "bench"
cfg = BenchConfig(
    dataset={"kind": "synthetic", "generator": "banana", "n": 1500, "d": 2,
             "params": {"noise": 0.3}},
    methods=("merge_l2", "merge_mahalanobis", "mcp_max", "otcp"),
    alpha=0.1,
    fractions=(0.3, 0.3, 0.2, 0.2),
    regressor={"kind": "knn_mean", "k": 25},
    otcp={"epsilon": 0.1, "m": 1024},
    seeds=(0, 1, 2),
    mc_samples=2000,
    region_size_points=15,
    output_dir=str(out),
)

report = run_benchmark(cfg)
print("per-method aggregates (mean +/- stderr across seeds):")
for method, agg in sorted(report.aggregates().items()):
    cov, size = agg["coverage"], agg["mean_region_size"]
    print(f"  {method:>18}: coverage {cov['mean']:.3f}+/-{cov['stderr']:.3f}, "
          f"size {size['mean']:.2f}+/-{size['stderr']:.2f}")

records = sweep(cfg, eps_list=[0.02, 0.1, 0.5], m_list=[512, 1024])
by_cell = {}
for r in records:
    by_cell.setdefault((r["epsilon"], r["m"]), []).append(r["mean_region_size"])
print("\nsweep median region size by (epsilon, m):")
for (eps, m), sizes in sorted(by_cell.items()):
    print(f"  eps={eps:<5g} m={m:<5d} -> {np.median(sizes):.2f}")

summary = json.loads((out / "report_summary.json").read_text())
print(f"\nwrote {out}/report.csv, report_summary.json, sweep.csv, models/*.json")
print(f"summary methods: {sorted(summary)}")
