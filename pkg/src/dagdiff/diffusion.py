"""Infection-probability trajectories on a DAG.

Linear mode solves ``dx/dt = -gamma * Lbar x`` with the action of the matrix
exponential; nonlinear mode integrates the rectified per-arc rate equation
with an adaptive Dormand-Prince pair.  ``competitor1`` is the hop-count
closed form baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .graph_core import GraphError, build_directed_laplacian, hop_distances, topo_sort, validate_dag


class NotValidated(GraphError):
    pass


class StepFailure(RuntimeError):
    pass


class NotDiagonalizable(ValueError):
    pass


CLIP_TOL = 1e-9


@dataclass(frozen=True)
class DiffusionParams:
    gamma: float
    times: tuple
    mode: str = "linear"
    rtol: float = 1e-8
    atol: float = 1e-8

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if t.ndim != 1 or t.size == 0 or t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be non-empty, strictly increasing and start at t >= 0")
        if self.mode not in ("linear", "nonlinear"):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "times", tuple(t.tolist()))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Row m of ``X`` is the signal at ``times[m]``; values are kept raw."""

    times: np.ndarray
    X: np.ndarray
    x0: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[1]

    def clipped(self):
        return np.clip(self.X, 0.0, 1.0)

    def overshoot(self):
        return float(max(0.0, self.X.max() - 1.0, -self.X.min()))


def parse_times(text):
    """``"0:100:5"`` (start:stop:step, stop inclusive) or a comma list."""
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        if step <= 0:
            raise ValueError("time step must be positive")
        k = int(np.floor((stop - start) / step + 1e-9))
        return tuple((start + step * np.arange(k + 1)).tolist())
    return tuple(float(p) for p in text.split(","))


def _source_vector(d, x0):
    if x0 is None:
        x0 = np.zeros(d.n)
        x0[d.source] = 1.0
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d.n,):
        raise ValueError(f"x0 must have shape ({d.n},)")
    return x0


def _require_valid(d):
    report = validate_dag(d)
    if not report.ok:
        raise NotValidated(f"DAG failed validation: {report.describe()}")


DENSE_MAX_N = 1500


def expm_action(d, gamma, times, x0):
    """Rows ``exp(-gamma * Lbar * t) x0`` for each t.

    Small DAGs step through the grid with one dense scaling-and-squaring
    exponential per distinct gap; large ones use the sparse action.
    """
    L = build_directed_laplacian(d)
    t = np.asarray(times, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if d.n <= DENSE_MAX_N:
        Ld = -gamma * L.toarray()
        cache = {}
        X = np.empty((t.size, d.n))
        x, prev = x0, 0.0
        for m, tm in enumerate(t):
            gap = float(tm - prev)
            if gap != 0.0:
                key = round(gap, 12)
                if key not in cache:
                    cache[key] = sla.expm(Ld * gap)
                x = cache[key] @ x
            X[m] = x
            prev = tm
        return X
    A = (-gamma * L).tocsc()
    step = np.diff(t)
    if t.size > 1 and np.allclose(step, step[0], rtol=1e-12, atol=0):
        X = spla.expm_multiply(A, x0, start=t[0], stop=t[-1], num=t.size, endpoint=True)
    else:
        X = np.stack([spla.expm_multiply(A * tm, x0) for tm in t])
    return np.atleast_2d(np.asarray(X, dtype=float))


def diffuse_linear(d, params, x0=None):
    _require_valid(d)
    x0 = _source_vector(d, x0)
    X = expm_action(d, params.gamma, params.times, x0)
    return Trajectory(np.array(params.times), X, x0, {"mode": "linear", "gamma": params.gamma})


def rectified_rate(d, gamma):
    tail, head, w = d.tail, d.head, d.w
    n = d.n

    def rhs(_t, x):
        flow = gamma * w * np.maximum(x[tail] - x[head], 0.0)
        return np.bincount(head, weights=flow, minlength=n)

    return rhs


def diffuse_nonlinear(d, params, x0=None, compare_linear=True):
    _require_valid(d)
    x0 = _source_vector(d, x0)
    t = np.asarray(params.times, dtype=float)
    if t[-1] == 0:
        X = x0[None, :].copy()
    else:
        sol = solve_ivp(
            rectified_rate(d, params.gamma),
            (0.0, float(t[-1])),
            x0,
            method="RK45",
            t_eval=t,
            rtol=params.rtol,
            atol=params.atol,
        )
        if sol.status != 0:
            raise StepFailure(f"adaptive integration failed: {sol.message}")
        X = sol.y.T
    meta = {"mode": "nonlinear", "gamma": params.gamma}
    if compare_linear:
        lin = expm_action(d, params.gamma, t, x0)
        meta["max_divergence_from_linear"] = float(np.abs(lin - X).max())
    return Trajectory(t, X, x0, meta)


def diffuse(d, params, x0=None):
    fn = diffuse_linear if params.mode == "linear" else diffuse_nonlinear
    return fn(d, params, x0)


@dataclass(frozen=True, eq=False)
class ModalBasis:
    """Eigen-decomposition of Lbar built by forward substitution in topological order.

    ``V[:, k]`` is the right eigenvector for ``eigenvalues[k]`` (node order),
    scaled to unit value at its own topological position; ``V[:, 0]`` is the
    all-ones vector.
    """

    order: np.ndarray
    eigenvalues: np.ndarray
    V: np.ndarray
    min_gap: float


def modal_basis(d, gap_tol=1e-9):
    order = topo_sort(d)
    n = d.n
    Lt = build_directed_laplacian(d).toarray()[np.ix_(order, order)]
    lam = np.diag(Lt).copy()
    diffs = np.abs(lam[:, None] - lam[None, :])[np.triu_indices(n, 1)]
    gap = float(diffs.min()) if diffs.size else np.inf
    if gap <= gap_tol * max(1.0, float(lam.max())):
        raise NotDiagonalizable(f"repeated eigenvalues (min gap {gap:.3e})")
    Vt = np.zeros((n, n))
    for k in range(n):
        Vt[k, k] = 1.0
        for i in range(k + 1, n):
            Vt[i, k] = -(Lt[i, k:i] @ Vt[k:i, k]) / (lam[i] - lam[k])
    V = np.empty_like(Vt)
    V[order] = Vt
    return ModalBasis(order=order, eigenvalues=lam, V=V, min_gap=gap)


def modal_coefficients(basis, x0):
    """Expansion coefficients of x0; coefficient 0 refers to ``1 / sqrt(N)``."""
    Vt = basis.V[basis.order]
    alpha = sla.solve_triangular(Vt, np.asarray(x0, float)[basis.order], lower=True)
    alpha = alpha.copy()
    alpha[0] *= np.sqrt(len(alpha))
    return alpha


def modal_expansion(d, gamma, times, x0=None, basis=None):
    """Sum of modes ``alpha_n exp(-gamma lambda_n t) v_n``; cross-check route only."""
    basis = basis or modal_basis(d)
    x0 = _source_vector(d, x0)
    alpha = modal_coefficients(basis, x0)
    alpha[0] /= np.sqrt(d.n)
    t = np.asarray(times, dtype=float)
    decay = np.exp(-gamma * np.outer(t, basis.eigenvalues))
    return (decay * alpha) @ basis.V.T


def competitor1(g, s, alpha, times):
    """``x_i(t) = 1 - exp(-alpha t / h_i)``; the source reads 1 at all times."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    h = hop_distances(g, s).astype(float)
    t = np.asarray(times, dtype=float)
    h_safe = np.where(h > 0, h, 1.0)
    X = 1.0 - np.exp(-alpha * np.outer(t, 1.0 / h_safe))
    X[:, s] = 1.0
    x0 = np.zeros(g.n)
    x0[s] = 1.0
    return Trajectory(t, X, x0, {"mode": "competitor1", "alpha": alpha})
