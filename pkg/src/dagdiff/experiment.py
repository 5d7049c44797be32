"""Replicate-level experiment driver.

Each replicate generates a weighted lattice, picks a source, simulates the
cascade ground truth and builds the proposed, hop and LLE DAGs.  Parameters
are tuned on the first share of replicates and scored on the rest.  Every
random draw is keyed by ``(master_seed, replicate, stream)``.
"""

from __future__ import annotations

import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import io as dio
from .dag import build_dag, build_hop_dag
from .diffusion import DiffusionParams, competitor1, diffuse
from .embedding import EmbeddingParams, embed, embed_lle
from .generators import LatticeSpec, generate_lattice, parse_dims
from .metrics import default_grid, mse_over_time, tune_parameters
from .montecarlo import SimConfig, simulate
from .seeding import derive_seed, rng_for

METHODS = ("proposed", "competitor1", "competitor2", "competitor3")
DAG_METHODS = ("proposed", "competitor2", "competitor3")

# stream ids under (master_seed, replicate)
_GRAPH, _SOURCE, _TRUTH, _EMBED = 1, 2, 3, 4


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "lattice2d-4"
    dims: tuple = (10, 10)
    replicates: int = 20
    master_seed: int = 0
    source: object = "random"  # "random" or a fixed node index
    K: int = 0  # 0 picks 2 for planar lattices and 3 for lattice3d
    gamma_grid: tuple = tuple(default_grid().tolist())
    alpha_grid: tuple = tuple(default_grid().tolist())
    times: tuple = tuple(range(0, 101, 5))
    trials: int = 2000
    tuning_fraction: float = 0.3
    repair: bool = True
    mode: str = "linear"
    snapshot_times: tuple = (40, 70)
    snapshot_source: int = 0
    out_dir: str = "experiment-out"
    jobs: int = 1

    def __post_init__(self):
        dims = parse_dims(self.dims) if isinstance(self.dims, str) else tuple(int(x) for x in self.dims)
        object.__setattr__(self, "dims", dims)
        for name in ("gamma_grid", "alpha_grid", "times", "snapshot_times"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if self.replicates < 1:
            raise ValueError("replicate count must be >= 1")
        if not 0 <= self.tuning_fraction < 1:
            raise ValueError("tuning fraction must lie in [0, 1)")
        if self.source != "random" and not isinstance(self.source, (int, np.integer)):
            raise ValueError("source must be 'random' or a node index")
        spec = LatticeSpec(self.kind, self.dims)
        for s in ([] if self.source == "random" else [self.source]) + [self.snapshot_source]:
            if not 0 <= int(s) < spec.n:
                raise ValueError(f"source {s} outside 0..{spec.n - 1}")
        SimConfig(trials=self.trials, times=self.times)
        SimConfig(trials=self.trials, times=self.snapshot_times)
        if not self.gamma_grid or not self.alpha_grid:
            raise ValueError("tuning grids must be non-empty")

    @property
    def latent_dim(self):
        return self.K or (3 if self.kind == "lattice3d" else 2)

    @property
    def n_tune(self):
        if self.replicates == 1:
            return 0
        k = int(round(self.tuning_fraction * self.replicates))
        return min(max(k, 1), self.replicates - 1)

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        for name in ("gamma_grid", "alpha_grid", "times", "snapshot_times"):
            if isinstance(data.get(name), str):
                from .diffusion import parse_times

                data[name] = parse_times(data[name])
        return cls(**data)

    def as_dict(self):
        return asdict(self)


def lattice_for(cfg, rep):
    return generate_lattice(LatticeSpec(cfg.kind, cfg.dims, derive_seed(cfg.master_seed, rep, _GRAPH)))


def source_for(cfg, rep, n):
    if cfg.source == "random":
        return int(rng_for(cfg.master_seed, rep, _SOURCE).integers(n))
    return int(cfg.source)


def _build_dags(cfg, g, s, seed):
    params = EmbeddingParams(K=cfg.latent_dim, seed=seed)
    dags, errors = {}, {}
    builders = {
        "proposed": lambda: build_dag(g, embed(g, params.K, params), s, repair=cfg.repair),
        "competitor2": lambda: build_hop_dag(g, s),
        "competitor3": lambda: build_dag(g, embed_lle(g, params.K, params=params), s, repair=cfg.repair),
    }
    for name, make in builders.items():
        try:
            dags[name] = make()
        except Exception as exc:  # recorded, replicate continues without this method
            errors[name] = f"{type(exc).__name__}: {exc}"
    return dags, errors


def prepare_replicate(cfg, rep):
    """Everything parameter-independent for one replicate."""
    try:
        g = lattice_for(cfg, rep)
        s = source_for(cfg, rep, g.n)
        truth = simulate(
            g, SimConfig(cfg.trials, cfg.times, derive_seed(cfg.master_seed, rep, _TRUTH), s)
        )
        dags, errors = _build_dags(cfg, g, s, derive_seed(cfg.master_seed, rep, _EMBED))
        return {"rep": rep, "graph": g, "source": s, "truth": truth, "dags": dags, "errors": errors}
    except Exception as exc:
        return {"rep": rep, "fatal": f"{type(exc).__name__}: {exc}", "trace": traceback.format_exc(limit=3)}


def predict(cfg, data, method, value):
    times = cfg.times
    if method == "competitor1":
        return competitor1(data["graph"], data["source"], value, times)
    return diffuse(data["dags"][method], DiffusionParams(value, times, cfg.mode))


def _usable(data):
    return "fatal" not in data and not data["errors"]


def _tune(cfg, tuning):
    tuned = {}
    for method in METHODS:
        grid = cfg.alpha_grid if method == "competitor1" else cfg.gamma_grid

        def objective(v, method=method):
            return np.mean([mse_over_time(predict(cfg, d, method, v), d["truth"]).average for d in tuning])

        res = tune_parameters(grid, objective)
        tuned[method] = {"value": res.best, "tuning_mse": res.value}
    return tuned


def _replicate_record(cfg, data, tuned):
    if "fatal" in data:
        return {"replicate": data["rep"], "status": "error", "error": data["fatal"]}
    rec = {
        "replicate": data["rep"],
        "status": "ok" if not data["errors"] else "error",
        "source": data["source"],
        "errors": data["errors"],
        "dags": {
            k: {"arcs": d.num_arcs, "repaired": bool(d.meta.get("repaired", False))}
            for k, d in data["dags"].items()
        },
    }
    if tuned is not None and not data["errors"]:
        rec["mse"] = {
            m: mse_over_time(predict(cfg, data, m, tuned[m]["value"]), data["truth"], m).per_time.tolist()
            for m in METHODS
        }
    return rec


def _snapshot(cfg, tuned):
    """Per-node signal at ``snapshot_times`` on replicate 0's graph from ``snapshot_source``."""
    g = lattice_for(cfg, 0)
    s = cfg.snapshot_source
    times = cfg.snapshot_times
    truth = simulate(g, SimConfig(cfg.trials, times, derive_seed(cfg.master_seed, 0, _TRUTH, s), s))
    dags, errors = _build_dags(cfg, g, s, derive_seed(cfg.master_seed, 0, _EMBED))
    rows = [("truth", t, truth.F[m]) for m, t in enumerate(times)]
    for method in METHODS:
        if method in errors or tuned is None:
            continue
        v = tuned[method]["value"]
        if method == "competitor1":
            traj = competitor1(g, s, v, times)
        else:
            traj = diffuse(dags[method], DiffusionParams(v, times, cfg.mode))
        rows += [(method, t, np.clip(traj.X[m], 0, 1)) for m, t in enumerate(times)]
    head = "method,t," + ",".join(f"node_{i}" for i in range(g.n))
    lines = [f"# snapshot v1 source={s}", head]
    lines += [",".join([name, repr(float(t))] + [repr(float(x)) for x in vals]) for name, t, vals in rows]
    return "\n".join(lines) + "\n"


def _summary(cfg, records, tuned):
    scored = [r for r in records if "mse" in r and r["replicate"] >= cfg.n_tune]
    if cfg.n_tune == 0:
        scored = [r for r in records if "mse" in r]
    out = {
        "tuned": tuned,
        "n_tuning": cfg.n_tune,
        "n_evaluated": len(scored),
        "failed_replicates": [r["replicate"] for r in records if r["status"] != "ok"],
        "times": list(cfg.times),
    }
    if not scored:
        return out
    curves = {m: np.mean([r["mse"][m] for r in scored], axis=0) for m in METHODS}
    avg = {m: np.array([np.mean(r["mse"][m]) for r in scored]) for m in METHODS}
    out["mean_mse_curve"] = {m: c.tolist() for m, c in curves.items()}
    out["average_mse"] = {m: float(a.mean()) for m, a in avg.items()}
    out["win_fraction_vs"] = {
        m: float(np.mean(avg["proposed"] <= avg[m])) for m in METHODS if m != "proposed"
    }
    out["proposed_best_at_last_two_times"] = {
        m: bool(np.all(curves["proposed"][-2:] < curves[m][-2:])) for m in METHODS if m != "proposed"
    }
    return out


def _curves_csv(summary):
    if "mean_mse_curve" not in summary:
        return "# mse_curves v1\nt\n"
    lines = ["# mse_curves v1", "t," + ",".join(METHODS)]
    for m, t in enumerate(summary["times"]):
        lines.append(",".join([repr(float(t))] + [repr(summary["mean_mse_curve"][k][m]) for k in METHODS]))
    return "\n".join(lines) + "\n"


def run_experiment(cfg, write=True):
    """Run all replicates, tune, score and (optionally) write the bundle to ``cfg.out_dir``."""
    reps = range(cfg.replicates)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            prepared = list(pool.map(prepare_replicate, [cfg] * cfg.replicates, reps))
    else:
        prepared = [prepare_replicate(cfg, r) for r in reps]

    # join barrier: tuning needs every tuning replicate
    if cfg.n_tune:
        tuning = [d for d in prepared[: cfg.n_tune] if _usable(d)]
    else:
        tuning = [d for d in prepared if _usable(d)]
    tuned = _tune(cfg, tuning) if tuning else None
    records = [_replicate_record(cfg, d, tuned) for d in prepared]
    summary = _summary(cfg, records, tuned)
    snapshot = _snapshot(cfg, tuned)
    bundle = {"config": cfg.as_dict(), "summary": summary, "replicates": records, "snapshot": snapshot}
    if write:
        write_bundle(bundle, cfg.out_dir)
    return bundle


def write_bundle(bundle, out_dir):
    rep_dir = os.path.join(out_dir, "replicates")
    for rec in bundle["replicates"]:
        dio.write_json(os.path.join(rep_dir, f"rep_{rec['replicate']:04d}.json"), "replicate v1", rec)
    cfg = dict(bundle["config"])
    cfg.pop("out_dir", None)
    cfg.pop("jobs", None)  # does not affect results
    dio.write_json(os.path.join(out_dir, "config.json"), "experiment-config v1", cfg)
    dio.write_json(os.path.join(out_dir, "summary.json"), "experiment-summary v1", bundle["summary"])
    dio.atomic_write(os.path.join(out_dir, "mse_curves.csv"), _curves_csv(bundle["summary"]))
    dio.atomic_write(os.path.join(out_dir, "snapshot.csv"), bundle["snapshot"])


__all__ = ["ExperimentConfig", "run_experiment", "write_bundle", "METHODS"]
