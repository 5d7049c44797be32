"""Independent-cascade ground truth on the undirected graph.

Discrete synchronous steps.  At step t every node infected at a step < t
tries each uninfected neighbour j once, succeeding when its uniform draw r
satisfies ``r < W_ij``.  Each trial owns a counter-keyed random stream, so
any partition of the trials into batches gives identical counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .seeding import rng_for


class ConfigMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    trials: int = 2000
    times: tuple = tuple(range(0, 101, 5))
    master_seed: int = 0
    source: int = 0
    chained: bool = False  # newly infected nodes transmit within the same step

    def __post_init__(self):
        t = np.asarray(self.times)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if t.ndim != 1 or t.size == 0:
            raise ValueError("time grid must be a non-empty 1-D sequence")
        if np.any(t != np.round(t)) or t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be ascending non-negative integers")
        object.__setattr__(self, "times", tuple(int(x) for x in t))


@dataclass(frozen=True, eq=False)
class SimSignal:
    """Infection counts per designated time; ``F`` gives the fractions."""

    counts: np.ndarray
    trials: int
    times: np.ndarray
    source: int
    signature: tuple

    @property
    def F(self):
        return self.counts / float(self.trials)

    @property
    def X(self):
        return self.F

    @property
    def n(self):
        return self.counts.shape[1]


def _signature(g, cfg):
    return (g.n, cfg.times, cfg.source, int(cfg.master_seed), cfg.chained)


def _arcs(g):
    src = np.concatenate([g.i, g.j])
    dst = np.concatenate([g.j, g.i])
    p = np.concatenate([g.w, g.w])
    return src, dst, p


def simulate(g, cfg, trial_start=0, trial_count=None, chunk=128):
    """Counts for trials ``trial_start .. trial_start + trial_count - 1``."""
    trial_count = cfg.trials if trial_count is None else int(trial_count)
    src, dst, p = _arcs(g)
    n, m = g.n, src.size
    into = sp.csr_matrix((np.ones(m), (np.arange(m), dst)), shape=(m, n))
    times = np.asarray(cfg.times)
    t_max = int(times[-1])
    slot = {int(t): k for k, t in enumerate(times)}
    counts = np.zeros((times.size, n), dtype=np.int64)

    for lo in range(trial_start, trial_start + trial_count, chunk):
        hi = min(lo + chunk, trial_start + trial_count)
        draws = np.stack([rng_for(cfg.master_seed, tau).random((t_max, m)) for tau in range(lo, hi)]) if t_max else None
        infected = np.zeros((hi - lo, n), dtype=bool)
        infected[:, cfg.source] = True
        if 0 in slot:
            counts[slot[0]] += infected.sum(axis=0)
        for t in range(1, t_max + 1):
            success = draws[:, t - 1, :] < p
            attackers = infected
            while True:
                attempt = attackers[:, src] & ~infected[:, dst] & success
                new = (into.T @ attempt.T.astype(np.float64)).T > 0
                new &= ~infected
                infected = infected | new
                if not cfg.chained or not new.any():
                    break
                attackers = new
            if t in slot:
                counts[slot[t]] += infected.sum(axis=0)
    return SimSignal(counts, trial_count, times.astype(float), cfg.source, _signature(g, cfg))


def aggregate(partials):
    """Merge batch counts; associative and commutative."""
    partials = list(partials)
    if not partials:
        raise ValueError("nothing to aggregate")
    sig = partials[0].signature
    for part in partials[1:]:
        if part.signature != sig:
            raise ConfigMismatch(f"batch config {part.signature} != {sig}")
    counts = sum(part.counts for part in partials)
    trials = sum(part.trials for part in partials)
    return SimSignal(counts, trials, partials[0].times.copy(), partials[0].source, sig)


def simulate_batched(g, cfg, batch_size=500):
    parts = [
        simulate(g, cfg, lo, min(batch_size, cfg.trials - lo))
        for lo in range(0, cfg.trials, batch_size)
    ]
    return aggregate(parts)
