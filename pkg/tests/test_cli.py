import json

import numpy as np
import pytest

from otcp import load_dataset_csv, read_region_csv
from otcp.cli import main


def _write_cfg(path, **over):
    cfg = {
        "dataset": {"kind": "synthetic", "generator": "gaussian", "n": 500, "d": 2},
        "methods": ["merge_l2"],
        "seeds": [0],
        "mc_samples": 200,
        "region_size_points": 2,
        "otcp": {"epsilon": 0.1, "m": 128},
    }
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return path


def test_synth_then_load(tmp_path, capsys):
    out = tmp_path / "data.csv"
    rc = main(["synth", "--kind", "banana", "--n", "80", "--seed", "3",
               "--out", str(out)])
    assert rc == 0
    ds = load_dataset_csv(out, d_out=2)
    assert (ds.n, ds.p, ds.d) == (80, 1, 2)
    assert "wrote 80 rows" in capsys.readouterr().out


def test_bench_run_success(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "cfg.json")
    rc = main(["bench", "run", "--config", str(cfg),
               "--output-dir", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out" / "report.csv").exists()
    assert "merge_l2: coverage" in capsys.readouterr().out


def test_bench_run_partial_failure_exit_code(tmp_path, capsys):
    # abs_univariate cannot run on d=2 data; merge_l2 still completes
    cfg = _write_cfg(tmp_path / "cfg.json", methods=["abs_univariate", "merge_l2"])
    rc = main(["bench", "run", "--config", str(cfg),
               "--output-dir", str(tmp_path / "out")])
    assert rc == 2
    report = (tmp_path / "out" / "report.csv").read_text()
    assert "failed" in report and "ok" in report


def test_bench_sweep_command(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "cfg.json", methods=["otcp"])
    rc = main(["bench", "sweep", "--config", str(cfg), "--eps", "0.1",
               "--targets", "128", "--output-dir", str(tmp_path / "sw")])
    assert rc == 0
    assert (tmp_path / "sw" / "sweep.csv").exists()
    assert "eps=0.1 m=128" in capsys.readouterr().out


def test_contour_command(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "cfg.json", methods=["otcp"])
    rc = main(["bench", "run", "--config", str(cfg),
               "--output-dir", str(tmp_path / "out")])
    assert rc == 0
    model = tmp_path / "out" / "models" / "otcp.json"
    rc = main(["contour", "--model", str(model), "--x", "0.5",
               "--alphas", "0.1", "0.5", "--out", str(tmp_path / "ct")])
    assert rc == 0
    files = sorted((tmp_path / "ct").glob("contour_*.csv"))
    assert len(files) == 2
    verts = read_region_csv(files[0])
    assert verts.shape[1] == 2 and np.isfinite(verts).all()


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
