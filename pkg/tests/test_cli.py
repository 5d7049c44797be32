import numpy as np
import pytest

from dagdiff import cli
from dagdiff import io as dio
from dagdiff.dag import build_dag
from dagdiff.diffusion import DiffusionParams, diffuse_linear, parse_times
from dagdiff.embedding import EmbeddingParams, embed
from dagdiff.generators import LatticeSpec, generate_lattice

SUBCOMMANDS = ["generate", "embed", "build-dag", "diffuse", "simulate", "evaluate",
               "compare-dags", "fit", "run-experiment"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.mark.parametrize("sub", SUBCOMMANDS + [None])
def test_help_exits_zero(sub, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(([sub] if sub else []) + ["--help"])
    assert info.value.code == 0


def test_usage_errors_exit_64(capsys):
    for argv in (["diffuse", "--dag", "x"], ["bogus"], [], ["generate", "--kind", "hex"]):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == 64


def test_missing_input_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.tsv"
    assert run("embed", "--graph", missing) == 2
    assert str(missing) in capsys.readouterr().err


def test_validation_error_exits_1(tmp_path, capsys):
    g = tmp_path / "g.tsv"
    assert run("generate", "--dims", "3x3", "--out", g) == 0
    assert run("build-dag", "--graph", g, "--source", 99, "--method", "hop") == 1
    bad = tmp_path / "bad.tsv"
    bad.write_text("ugraph v7\n")
    assert run("embed", "--graph", bad) == 1


def test_file_pipeline_matches_library(tmp_path):
    g, e, d, x = (tmp_path / n for n in ("g.tsv", "e.tsv", "d.tsv", "x.csv"))
    assert run("generate", "--kind", "lattice2d-8", "--dims", "6x6", "--seed", 5, "--out", g) == 0
    assert run("embed", "--graph", g, "--K", 2, "--seed", 5, "--out", e) == 0
    assert run("build-dag", "--graph", g, "--embedding", e, "--source", 7, "--repair", "--out", d) == 0
    assert run("diffuse", "--dag", d, "--gamma", 0.8, "--times", "0:100:5", "--out", x) == 0

    graph = generate_lattice(LatticeSpec("lattice2d-8", (6, 6), 5))
    emb = embed(graph, 2, EmbeddingParams(K=2, seed=5))
    dag = build_dag(graph, emb, 7, repair=True)
    traj = diffuse_linear(dag, DiffusionParams(0.8, parse_times("0:100:5")))
    assert g.read_text() == dio.format_ugraph(graph)
    assert e.read_text() == dio.format_embedding(emb)
    assert d.read_text() == dio.format_dag(dag)
    assert x.read_text() == dio.format_signal(traj.times, traj.X, "trajectory")


def test_simulate_evaluate_compare(tmp_path, capsys):
    g, d, h, x, f, r = (tmp_path / n for n in ("g.tsv", "d.tsv", "h.tsv", "x.csv", "f.csv", "r.json"))
    run("generate", "--dims", "4x4", "--seed", 1, "--out", g)
    assert run("build-dag", "--graph", g, "--source", 0, "--method", "hop", "--out", h) == 0
    assert run("diffuse", "--dag", h, "--gamma", 1.0, "--times", "0:20:5", "--out", x) == 0
    assert run("simulate", "--graph", g, "--source", 0, "--trials", 50, "--times", "0:20:5", "--out", f) == 0
    assert run("evaluate", "--pred", x, "--truth", f, "--out", r) == 0
    rep = dio.read_json(r)
    assert rep["format"] == "mse-report v1" and len(rep["mse"]) == 5
    assert run("compare-dags", "--model", h, "--reference", h) == 0
    out = capsys.readouterr().out
    assert '"RE":0.0' in out and '"DCS":1.0' in out


def test_seed_env_fallback(tmp_path, monkeypatch):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    monkeypatch.setenv("DAGDIFF_SEED", "17")
    run("generate", "--dims", "3x3", "--out", a)
    monkeypatch.delenv("DAGDIFF_SEED")
    run("generate", "--dims", "3x3", "--seed", 17, "--out", b)
    assert a.read_text() == b.read_text()


def test_fit_command(tmp_path):
    X = np.cumsum(np.random.default_rng(0).random((40, 3)), axis=0)
    panel = tmp_path / "p.csv"
    panel.write_text("date,a,b,c\n" + "".join(f"{t}," + ",".join(repr(float(v)) for v in row) + "\n" for t, row in enumerate(X)))
    dist = tmp_path / "dist.csv"
    dist.write_text("a,b,3\na,c,4\nb,c,5\n")
    out, rep = tmp_path / "w.tsv", tmp_path / "rep.json"
    assert run("fit", "--panel", panel, "--distances", dist, "--source", "a", "--out", out, "--report", rep) == 0
    assert out.read_text().startswith("fitted v1\nlabels=a,b,c\n")
    assert set(dio.read_json(rep)["methods"]) == {"proposed", "competitor2", "competitor3"}


def test_run_experiment_with_config(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "kind: lattice2d-4\ndims: 4x4\nreplicates: 2\ntrials: 40\n"
        "gamma_grid: [0.5, 1.0]\nalpha_grid: [0.5, 1.0]\ntimes: '0:20:5'\nsnapshot_times: [5, 10]\n"
    )
    out = tmp_path / "bundle"
    assert run("run-experiment", "--config", cfg, "--seed", 3, "--out-dir", out) == 0
    assert dio.read_json(out / "summary.json")["format"] == "experiment-summary v1"
    assert dio.read_json(out / "config.json")["master_seed"] == 3
    assert run("run-experiment", "--config", tmp_path / "absent.yaml") == 2
