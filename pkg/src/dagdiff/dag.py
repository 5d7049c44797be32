"""Source-rooted DAGs from latent coordinates or BFS hop layers, and their spectra.

Arc weights carry the undirected edge weight over unchanged.  Orientation
follows a strict potential: latent distance to the source, ties broken by
node index, so the result is acyclic by construction.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .graph_core import (
    Dag,
    GraphError,
    build_directed_laplacian,
    check_node,
    hop_distances,
    topo_sort,
    validate_dag,
)


class DagInvalid(GraphError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"constructed DAG is invalid: {report.describe()}")


def _orient(g, key, s, method):
    # arc from the endpoint with the smaller (key, index)
    forward = (key[g.i] < key[g.j]) | ((key[g.i] == key[g.j]) & (g.i < g.j))
    tail = np.where(forward, g.i, g.j)
    head = np.where(forward, g.j, g.i)
    return Dag(g.n, tail, head, g.w, s, {"method": method})


def flood_orientation(g, key, s, method):
    """Orient every edge by the order of a priority flood from ``s``.

    Nodes are visited in increasing ``(key, index)`` among those adjacent to
    the visited set.  When the plain key orientation already has ``s`` as its
    only source the visit order equals the key order and nothing changes;
    otherwise each spurious source is re-entered from the first visited
    neighbour.  Optional repair, labelled in ``meta``.
    """
    pos = np.full(g.n, -1, dtype=np.int64)
    heap = [(float(key[s]), s)]
    seen = {s}
    k = 0
    while heap:
        _, v = heapq.heappop(heap)
        pos[v] = k
        k += 1
        for u in g.neighbors(v).tolist():
            if u not in seen:
                seen.add(u)
                heapq.heappush(heap, (float(key[u]), u))
    if k < g.n:
        raise GraphError("graph is disconnected; cannot repair orientation")
    forward = pos[g.i] < pos[g.j]
    tail = np.where(forward, g.i, g.j)
    head = np.where(forward, g.j, g.i)
    return Dag(g.n, tail, head, g.w, s, {"method": method})


def _finish(g, dag, key, s, repair):
    report = validate_dag(dag)
    if report.ok:
        return dag
    if not repair:
        raise DagInvalid(report)
    fixed = flood_orientation(g, key, s, dag.meta["method"])
    before = set(zip(dag.tail.tolist(), dag.head.tolist()))
    flipped = sum((t, h) not in before for t, h in zip(fixed.tail.tolist(), fixed.head.tolist()))
    fixed.meta.update(repaired=True, secondary_sources=list(report.extra_sources), reversed_arcs=flipped)
    rep = validate_dag(fixed)
    if not rep.ok:
        raise DagInvalid(rep)
    return fixed


def latent_distances(emb, s):
    P = emb.P if hasattr(emb, "P") else np.asarray(emb)
    return np.linalg.norm(P - P[s], axis=1)


def build_dag(g, emb, s, repair=False):
    """Arc i -> j for each edge with ``||p_s - p_i|| < ||p_s - p_j||``."""
    check_node(g, s)
    key = latent_distances(emb, s)
    if key.shape != (g.n,):
        raise GraphError(f"embedding has {key.size} rows, graph has {g.n} nodes")
    key = key.copy()
    key[s] = -np.inf
    return _finish(g, _orient(g, key, s, "latent"), key, s, repair)


def build_hop_dag(g, s):
    """Arc i -> j for each edge with ``h_i < h_j``; same-hop edges are dropped."""
    h = hop_distances(g, s)
    keep = h[g.i] != h[g.j]
    fwd = h[g.i[keep]] < h[g.j[keep]]
    tail = np.where(fwd, g.i[keep], g.j[keep])
    head = np.where(fwd, g.j[keep], g.i[keep])
    dag = Dag(g.n, tail, head, g.w[keep], s, {"method": "hop"})
    report = validate_dag(dag)
    if not report.ok:
        raise DagInvalid(report)
    return dag


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    n_zero: int
    right_residual: float
    left_residual: float
    u1: np.ndarray
    v1: np.ndarray
    orthogonality: float | None = None
    eig_crosscheck: float | None = None

    @property
    def lambda2(self):
        return float(self.eigenvalues[1]) if self.eigenvalues.size > 1 else float("nan")

    def as_dict(self):
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "n_zero": self.n_zero,
            "right_residual": self.right_residual,
            "left_residual": self.left_residual,
            "orthogonality": self.orthogonality,
            "eig_crosscheck": self.eig_crosscheck,
        }


def spectrum_report(d, crosscheck_max_n=200):
    """Eigenvalues read off the triangular diagonal, plus eigenvector residuals.

    For ``n <= crosscheck_max_n`` a general (non-symmetric) eigensolver is run
    as an independent check: ``eig_crosscheck`` is the largest gap between its
    sorted eigenvalues and the in-degrees, and ``orthogonality`` is
    ``max_n>1 |u_1^T v_n|`` over its unit right eigenvectors.
    """
    order = topo_sort(d)
    L = build_directed_laplacian(d)
    lam = np.sort(L.diagonal()[order])
    n = d.n
    ones = np.ones(n)
    u1 = np.zeros(n)
    u1[d.source] = 1.0
    right = float(np.abs(L @ ones).max())
    left = float(np.abs(L.T @ u1).max())
    ortho = cross = None
    if n <= crosscheck_max_n:
        w, V = sla.eig(L.toarray())
        first = int(np.argmin(np.abs(w)))
        others = np.delete(np.arange(n), first)
        V = V / np.linalg.norm(V, axis=0)
        ortho = float(np.abs(V[d.source, others]).max()) if others.size else 0.0
        cross = float(np.abs(np.sort(w.real) - lam).max())
    return SpectrumReport(
        eigenvalues=lam,
        n_zero=int(np.sum(lam == 0)),
        right_residual=right,
        left_residual=left,
        u1=u1,
        v1=ones / np.sqrt(n),
        orthogonality=ortho,
        eig_crosscheck=cross,
    )
