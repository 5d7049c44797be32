"""``dagdiff`` command line.

Exit codes: 0 success, 1 validation error, 2 I/O error, 64 usage error.
Randomness comes from ``--seed``, falling back to ``$DAGDIFF_SEED`` and then 0.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io as dio
from .dag import build_dag, build_hop_dag, spectrum_report
from .diffusion import DiffusionParams, diffuse, parse_times
from .embedding import EMBEDDERS, EmbeddingParams
from .generators import KINDS, LatticeSpec, generate_lattice, parse_dims
from .metrics import compare, mse_over_time
from .montecarlo import SimConfig, simulate_batched

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: usage error: {message}\n")
        sys.exit(EXIT_USAGE)


def resolve_seed(value):
    if value is not None:
        return value
    env = os.environ.get("DAGDIFF_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"DAGDIFF_SEED must be an integer, got {env!r}") from None


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        dio.atomic_write(out, text)


def cmd_generate(a):
    spec = LatticeSpec(a.kind, parse_dims(a.dims), resolve_seed(a.seed))
    _emit(dio.format_ugraph(generate_lattice(spec)), a.out)


def cmd_embed(a):
    g = dio.read_ugraph(a.graph)
    params = EmbeddingParams(K=a.K, seed=resolve_seed(a.seed), method=a.solver)
    emb = EMBEDDERS[a.method](g, a.K, params=params)
    _emit(dio.format_embedding(emb), a.out)


def cmd_build_dag(a):
    g = dio.read_ugraph(a.graph)
    if a.method == "hop":
        d = build_hop_dag(g, a.source)
    else:
        if not a.embedding:
            raise UsageError("--embedding is required for --method latent")
        emb = dio.read_embedding(a.embedding)
        if emb.n != g.n:
            raise ValueError(f"embedding has {emb.n} rows but graph has {g.n} nodes")
        d = build_dag(g, emb, a.source, repair=a.repair)
    _emit(dio.format_dag(d), a.out)
    if a.report:
        rep = spectrum_report(d).as_dict()
        rep["repair"] = {k: d.meta[k] for k in ("repaired", "secondary_sources", "reversed_arcs") if k in d.meta}
        dio.write_json(a.report, "spectrum-report v1", rep)


def cmd_diffuse(a):
    d = dio.read_dag(a.dag)
    traj = diffuse(d, DiffusionParams(a.gamma, parse_times(a.times), a.mode))
    _emit(dio.format_signal(traj.times, traj.X, "trajectory"), a.out)
    if a.mode == "nonlinear" and "max_divergence_from_linear" in traj.meta:
        sys.stderr.write(f"max |linear - nonlinear| = {traj.meta['max_divergence_from_linear']:.3e}\n")


def cmd_simulate(a):
    g = dio.read_ugraph(a.graph)
    cfg = SimConfig(a.trials, parse_times(a.times), resolve_seed(a.seed), a.source, a.chained)
    if not 0 <= a.source < g.n:
        raise ValueError(f"source {a.source} outside 0..{g.n - 1}")
    sig = simulate_batched(g, cfg, a.batch_size)
    _emit(dio.format_signal(sig.times, sig.F, "simsignal", f"trials={sig.trials}"), a.out)


def cmd_evaluate(a):
    pred, truth = dio.read_signal(a.pred), dio.read_signal(a.truth)
    rep = mse_over_time(pred, truth, a.method, clip=not a.no_clip)
    _emit(dio.format_json("mse-report v1", rep.as_dict()), a.out)


def _laplacian_source(path):
    with open(path) as fh:
        head = fh.readline().strip()
    if head == "fitted v1":
        W, _ = dio.read_fitted(path)
        return np.diag(W.sum(axis=0)) - W.T
    return dio.read_dag(path)


def cmd_compare_dags(a):
    model, ref = _laplacian_source(a.model), _laplacian_source(a.reference)
    rep = compare(model, ref, symmetrize=not a.directed, method=a.method)
    _emit(dio.format_json("similarity-report v1", rep.as_dict()), a.out)


def cmd_fit(a):
    from .inference import evaluate_real_pipeline, fit_dag_weights, ingest_panel, read_distances

    panel = ingest_panel(a.panel, normalization=a.normalization)
    if a.distances:
        dist = read_distances(a.distances, panel.labels)
        src = a.source if a.source is not None else 0
        src = int(src) if str(src).isdigit() else src
        rep = evaluate_real_pipeline(panel, dist, a.sigma, src, a.K, repair=True, seed=resolve_seed(a.seed))
        fit = rep.fit
        if a.report:
            dio.write_json(a.report, "real-pipeline-report v1", rep.as_dict())
    else:
        fit = fit_dag_weights(panel)
    _emit(dio.format_fitted(fit.W, panel.labels), a.out)


def _load_config(path):
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return data


def cmd_run_experiment(a):
    from .experiment import ExperimentConfig, run_experiment

    data = _load_config(a.config) if a.config else {}
    overrides = {
        "kind": a.kind, "dims": a.dims, "replicates": a.replicates, "trials": a.trials,
        "out_dir": a.out_dir, "jobs": a.jobs, "K": a.K, "times": a.times,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if a.source is not None:
        data["source"] = a.source if a.source == "random" else int(a.source)
    if a.seed is not None or "master_seed" not in data:
        data["master_seed"] = resolve_seed(a.seed)
    cfg = ExperimentConfig.from_mapping(data)
    bundle = run_experiment(cfg)
    s = bundle["summary"]
    sys.stderr.write(
        f"wrote {cfg.out_dir}: {s['n_evaluated']} evaluated replicates, "
        f"{len(s['failed_replicates'])} failed\n"
    )


def build_parser():
    p = _Parser(prog="dagdiff", description="DAG diffusion modelling of one-way spreading.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(fn=fn)
        return sp

    def seed(sp):
        sp.add_argument("--seed", type=int, default=None, help="random seed (default: $DAGDIFF_SEED or 0)")

    def out(sp, what):
        sp.add_argument("--out", default=None, help=f"{what} path (default: stdout)")

    sp = add("generate", cmd_generate, "Generate a weighted lattice graph.")
    sp.add_argument("--kind", choices=KINDS, default="lattice2d-4")
    sp.add_argument("--dims", default="10x10", help="e.g. 10x10 or 3x6x6")
    seed(sp)
    out(sp, "ugraph")

    sp = add("embed", cmd_embed, "Embed a graph into K latent dimensions.")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--K", type=int, default=2)
    sp.add_argument("--method", choices=sorted(EMBEDDERS), default="ev")
    sp.add_argument("--solver", choices=("auto", "dense", "lobpcg"), default="auto")
    seed(sp)
    out(sp, "embedding")

    sp = add("build-dag", cmd_build_dag, "Orient graph edges into a source-rooted DAG.")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--embedding", default=None)
    sp.add_argument("--source", type=int, required=True)
    sp.add_argument("--method", choices=("latent", "hop"), default="latent")
    sp.add_argument("--repair", action="store_true", help="re-orient to remove secondary sources")
    sp.add_argument("--report", default=None, help="write a spectrum report JSON here")
    out(sp, "dag")

    sp = add("diffuse", cmd_diffuse, "Solve DAG diffusion from the source.")
    sp.add_argument("--dag", required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--times", default="0:100:5")
    sp.add_argument("--mode", choices=("linear", "nonlinear"), default="linear")
    out(sp, "trajectory CSV")

    sp = add("simulate", cmd_simulate, "Monte Carlo independent-cascade ground truth.")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--source", type=int, required=True)
    sp.add_argument("--trials", type=int, default=2000)
    sp.add_argument("--times", default="0:100:5")
    sp.add_argument("--batch-size", type=int, default=500)
    sp.add_argument("--chained", action="store_true")
    seed(sp)
    out(sp, "signal CSV")

    sp = add("evaluate", cmd_evaluate, "Per-time MSE of a prediction against a signal.")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--method", default="")
    sp.add_argument("--no-clip", action="store_true")
    out(sp, "JSON report")

    sp = add("compare-dags", cmd_compare_dags, "RE and DeltaCon similarity of two DAGs.")
    sp.add_argument("--model", required=True, help="dag v1 file")
    sp.add_argument("--reference", required=True, help="dag v1 or fitted v1 file")
    sp.add_argument("--directed", action="store_true", help="skip adjacency symmetrization")
    sp.add_argument("--method", default="")
    out(sp, "JSON report")

    sp = add("fit", cmd_fit, "Fit DAG weights to a cumulative time-series panel.")
    sp.add_argument("--panel", required=True)
    sp.add_argument("--distances", default=None, help="label,label,distance CSV")
    sp.add_argument("--sigma", type=float, default=None)
    sp.add_argument("--source", default=None, help="source label or index")
    sp.add_argument("--K", type=int, default=2)
    sp.add_argument("--normalization", choices=("final",), default="final")
    sp.add_argument("--report", default=None)
    seed(sp)
    out(sp, "fitted weights")

    sp = add("run-experiment", cmd_run_experiment, "Replicated lattice experiment with tuning.")
    sp.add_argument("--config", default=None, help="YAML config file")
    sp.add_argument("--kind", choices=KINDS, default=None)
    sp.add_argument("--dims", default=None)
    sp.add_argument("--replicates", type=int, default=None)
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--source", default=None, help="'random' or a node index")
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--times", default=None)
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("--jobs", type=int, default=None)
    seed(sp)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except UsageError as exc:
        sys.stderr.write(f"dagdiff: usage error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        where = f": {exc.filename}" if getattr(exc, "filename", None) else ""
        sys.stderr.write(f"dagdiff: I/O error{where}: {exc.strerror or exc}\n")
        return EXIT_IO
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"dagdiff: {type(exc).__name__}: {exc}\n")
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
