#!/usr/bin/env python3
"""Run the desk-scale lattice experiment and print the headline comparisons.

    python3 scripts/run_desk_experiment.py --config configs/desk.yaml --seed 0
"""

import argparse
import sys
import time

import yaml

from dagdiff.experiment import METHODS, ExperimentConfig, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default="configs/desk.yaml")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args(argv)

    with open(args.config) as fh:
        data = yaml.safe_load(fh) or {}
    for key, val in (("master_seed", args.seed), ("jobs", args.jobs), ("out_dir", args.out_dir)):
        if val is not None:
            data[key] = val
    cfg = ExperimentConfig.from_mapping(data)

    t0 = time.perf_counter()
    s = run_experiment(cfg)["summary"]
    print(f"{cfg.replicates} replicates ({s['n_tuning']} tuning), {time.perf_counter() - t0:.1f}s -> {cfg.out_dir}")
    print("tuned:", {m: s["tuned"][m]["value"] for m in METHODS})
    print(f"{'method':<12} {'avg MSE':>10} {'MSE t_-2':>10} {'MSE t_-1':>10}")
    for m in METHODS:
        c = s["mean_mse_curve"][m]
        print(f"{m:<12} {s['average_mse'][m]:>10.3e} {c[-2]:>10.3e} {c[-1]:>10.3e}")
    print("proposed <= competitor (per-replicate average MSE):", s["win_fraction_vs"])
    print("proposed lowest at last two times:", s["proposed_best_at_last_two_times"])
    if s["failed_replicates"]:
        print("failed replicates:", s["failed_replicates"], file=sys.stderr)


if __name__ == "__main__":
    main()
