import filecmp
import os

import numpy as np
import pytest

import dagdiff.experiment as ex
from dagdiff.experiment import METHODS, ExperimentConfig, run_experiment


def small(tmp_path, name="out", **kw):
    base = dict(dims=(5, 5), replicates=4, trials=60, master_seed=11,
                gamma_grid=(0.3, 0.9, 1.5), alpha_grid=(0.3, 0.9, 1.5),
                times=tuple(range(0, 31, 5)), snapshot_times=(10, 20), out_dir=str(tmp_path / name))
    base.update(kw)
    return ExperimentConfig(**base)


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.diff_files or cmp.funny_files:
        return False
    return all(same_tree(os.path.join(a, d), os.path.join(b, d)) for d in cmp.common_dirs)


def test_bundle_contents(tmp_path):
    cfg = small(tmp_path)
    bundle = run_experiment(cfg)
    s = bundle["summary"]
    assert s["n_tuning"] == 1 and s["n_evaluated"] == 3
    assert set(s["mean_mse_curve"]) == set(METHODS)
    assert all(len(c) == len(cfg.times) for c in s["mean_mse_curve"].values())
    files = sorted(os.listdir(cfg.out_dir))
    assert files == ["config.json", "mse_curves.csv", "replicates", "snapshot.csv", "summary.json"]
    assert len(os.listdir(os.path.join(cfg.out_dir, "replicates"))) == 4
    for root, _, names in os.walk(cfg.out_dir):
        for n in names:
            with open(os.path.join(root, n)) as fh:
                head = fh.readline()
            assert " v1" in head.split(",")[0]


def test_snapshot_shape(tmp_path):
    cfg = small(tmp_path, dims=(10, 10), replicates=2)
    run_experiment(cfg)
    with open(os.path.join(cfg.out_dir, "snapshot.csv")) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "# snapshot v1 source=0"
    assert lines[1].split(",")[:3] == ["method", "t", "node_0"] and len(lines[1].split(",")) == 102
    rows = [ln.split(",") for ln in lines[2:]]
    assert {(r[0], float(r[1])) for r in rows} == {(m, t) for m in ("truth",) + METHODS for t in (10.0, 20.0)}
    vals = np.array([[float(v) for v in r[2:]] for r in rows])
    assert np.all((vals >= 0) & (vals <= 1))


def test_byte_identical_reruns(tmp_path):
    a, b = small(tmp_path, "a", replicates=1), small(tmp_path, "b", replicates=1)
    run_experiment(a)
    run_experiment(b)
    assert same_tree(a.out_dir, b.out_dir)


def test_parallel_matches_serial(tmp_path):
    a, b = small(tmp_path, "serial"), small(tmp_path, "parallel", jobs=2)
    run_experiment(a)
    run_experiment(b)
    assert same_tree(a.out_dir, b.out_dir)


def test_component_error_aborts_only_that_replicate(tmp_path, monkeypatch):
    real = ex.embed_lle
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("solver blew up")
        return real(*args, **kwargs)

    monkeypatch.setattr(ex, "embed_lle", flaky)
    bundle = run_experiment(small(tmp_path), write=False)
    recs = bundle["replicates"]
    assert [r["status"] for r in recs] == ["ok", "ok", "error", "ok"]
    assert "solver blew up" in recs[2]["errors"]["competitor3"]
    assert bundle["summary"]["failed_replicates"] == [2] and bundle["summary"]["n_evaluated"] == 2


def test_seeded_source_selection(tmp_path):
    cfg = small(tmp_path, replicates=6)
    srcs = [r["source"] for r in run_experiment(cfg, write=False)["replicates"]]
    assert srcs == [ex.source_for(cfg, k, 25) for k in range(6)]
    fixed = small(tmp_path, replicates=2, source=4)
    assert [r["source"] for r in run_experiment(fixed, write=False)["replicates"]] == [4, 4]


@pytest.mark.parametrize("bad", [dict(replicates=0), dict(source=99), dict(tuning_fraction=1.0),
                                 dict(times=(0, 2.5)), dict(kind="hex")])
def test_config_validation(tmp_path, bad):
    with pytest.raises(ValueError):
        small(tmp_path, **bad)


def test_config_from_mapping():
    cfg = ExperimentConfig.from_mapping({"dims": "4x4", "times": "0:10:5", "replicates": 2})
    assert cfg.dims == (4, 4) and cfg.times == (0.0, 5.0, 10.0)
    with pytest.raises(ValueError):
        ExperimentConfig.from_mapping({"colour": "red"})


@pytest.mark.slow
def test_fifty_replicate_win_rate_over_competitor1():
    cfg = ExperimentConfig(dims=(10, 10), replicates=50, trials=2000, master_seed=1)
    s = run_experiment(cfg, write=False)["summary"]
    assert s["n_evaluated"] == 35 and not s["failed_replicates"]
    assert s["win_fraction_vs"]["competitor1"] >= 0.7
