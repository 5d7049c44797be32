"""Prediction error over time, Laplacian/DAG similarity, and grid tuning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .graph_core import Dag, UndirectedGraph, build_directed_laplacian


class GridMismatch(ValueError):
    pass


class ZeroReference(ZeroDivisionError):
    pass


class EmptyGrid(ValueError):
    pass


class SingularAffinity(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class MseReport:
    times: np.ndarray
    per_time: np.ndarray
    method: str = ""

    @property
    def average(self):
        return float(self.per_time.mean())

    def as_dict(self):
        return {
            "method": self.method,
            "times": self.times.tolist(),
            "mse": self.per_time.tolist(),
            "average": self.average,
        }


def _values(x, clip):
    X = np.asarray(x.X, dtype=float)
    return np.clip(X, 0.0, 1.0) if clip else X


def mse_over_time(pred, truth, method="", clip=True):
    """Per-time mean over nodes of the squared error; predictions clipped to [0, 1]."""
    tp, tt = np.asarray(pred.times, float), np.asarray(truth.times, float)
    if tp.shape != tt.shape or not np.allclose(tp, tt, rtol=0, atol=1e-9):
        raise GridMismatch(f"time grids differ: {tp.tolist()} vs {tt.tolist()}")
    Xp, Xt = _values(pred, clip), np.asarray(truth.X, dtype=float)
    if Xp.shape != Xt.shape:
        raise GridMismatch(f"signal shapes differ: {Xp.shape} vs {Xt.shape}")
    return MseReport(tt.copy(), ((Xp - Xt) ** 2).mean(axis=1), method)


def _as_matrix(x):
    if isinstance(x, (Dag, UndirectedGraph)):
        return x.adjacency.toarray()
    if sp.issparse(x):
        return x.toarray()
    return np.asarray(x, dtype=float)


def laplacian_of(x):
    """Directed Laplacian of a Dag, or ``x`` itself when already a matrix."""
    if isinstance(x, Dag):
        return build_directed_laplacian(x).toarray()
    return _as_matrix(x)


def adjacency_from_laplacian(L):
    """Recover ``W`` from ``L = D_in - W^T``."""
    L = _as_matrix(L)
    Wt = -(L - np.diag(np.diag(L)))
    return Wt.T


def relative_error(L_model, L_ref):
    """``||L_model - L_ref||_F / ||L_ref||_F`` with the reference in the denominator."""
    A, B = laplacian_of(L_model), laplacian_of(L_ref)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch {A.shape} vs {B.shape}")
    denom = np.linalg.norm(B, "fro")
    if denom == 0:
        raise ZeroReference("reference Laplacian has zero Frobenius norm")
    return float(np.linalg.norm(A - B, "fro") / denom)


def affinity(W, symmetrize=True, eps=None):
    """Fast-belief-propagation affinity ``inv(I + e^2 D - e A)``, ``e = 1/(1 + max degree)``."""
    A = _as_matrix(W)
    if symmetrize:
        A = (A + A.T) / 2.0
    deg = A.sum(axis=1)
    if eps is None:
        eps = 1.0 / (1.0 + deg.max())
    n = A.shape[0]
    M = np.eye(n) + eps**2 * np.diag(deg) - eps * A
    for attempt in range(2):
        try:
            S = sla.solve(M, np.eye(n))
            if not np.all(np.isfinite(S)):
                raise sla.LinAlgError("non-finite affinity")
            return S
        except sla.LinAlgError:
            if attempt:
                raise SingularAffinity(f"affinity system singular at eps={eps:.3e}")
            eps /= 2.0
            M = np.eye(n) + eps**2 * np.diag(deg) - eps * A


def deltacon_similarity(a, b, symmetrize=True):
    """DeltaCon similarity ``1 / (1 + d)`` with root-Euclidean affinity distance ``d``.

    ``a`` and ``b`` may be Dags, undirected graphs or adjacency matrices over
    the same node set.  With ``symmetrize`` the directed adjacencies are
    replaced by ``(W + W^T) / 2`` first.
    """
    Sa = np.clip(affinity(a, symmetrize), 0.0, None)
    Sb = np.clip(affinity(b, symmetrize), 0.0, None)
    if Sa.shape != Sb.shape:
        raise ValueError(f"node sets differ: {Sa.shape} vs {Sb.shape}")
    d = np.sqrt(np.sum((np.sqrt(Sa) - np.sqrt(Sb)) ** 2))
    return float(1.0 / (1.0 + d))


@dataclass(frozen=True)
class SimilarityReport:
    re: float
    dcs: float
    symmetrized: bool = True
    method: str = ""

    def as_dict(self):
        return {"method": self.method, "RE": self.re, "DCS": self.dcs, "deltacon_symmetrized": self.symmetrized}


def compare(model, reference, symmetrize=True, method=""):
    """RE of the Laplacians and DCS of the adjacencies; ``reference`` is the data side."""
    La, Lb = laplacian_of(model), laplacian_of(reference)
    Wa = model.adjacency.toarray() if isinstance(model, Dag) else adjacency_from_laplacian(La)
    Wb = reference.adjacency.toarray() if isinstance(reference, Dag) else adjacency_from_laplacian(Lb)
    return SimilarityReport(relative_error(La, Lb), deltacon_similarity(Wa, Wb, symmetrize), symmetrize, method)


@dataclass(frozen=True, eq=False)
class TuneResult:
    best: float
    value: float
    grid: np.ndarray
    scores: np.ndarray = field(repr=False)


def default_grid():
    return np.round(0.01 * np.arange(1, 201), 10)


def tune_parameters(grid, objective):
    """Exhaustive search; each grid value is evaluated once, ties go to the smaller value."""
    grid = np.sort(np.asarray(list(grid), dtype=float))
    if grid.size == 0:
        raise EmptyGrid("search grid is empty")
    scores = np.array([float(objective(v)) for v in grid])
    k = int(np.argmin(scores))
    return TuneResult(float(grid[k]), float(scores[k]), grid, scores)
