"""Graph containers, Laplacians and traversals shared by every other module.

Node indices are 0-based throughout.  Both containers are immutable: the
edge arrays are stored sorted and flagged read-only.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Base class for structural problems with an input graph."""


class DisconnectedGraph(GraphError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        sizes = [len(c) for c in self.components]
        super().__init__(
            f"graph is disconnected: {len(sizes)} components of sizes {sizes}; "
            f"smallest component {min(self.components, key=len)[:20]}"
        )


class CycleDetected(GraphError):
    def __init__(self, nodes):
        self.nodes = sorted(nodes)
        super().__init__(f"arc set contains a directed cycle through nodes {self.nodes[:20]}")


class Unreachable(GraphError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"node {node} is unreachable from the source")


def _readonly(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class UndirectedGraph:
    """Symmetric positive graph stored as a canonical edge list.

    Edges are kept as parallel arrays ``i < j`` sorted lexicographically by
    ``(i, j)``.  Weights lie in (0, 1]; absent pairs read as weight 0.
    """

    n: int
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64)
        j = np.asarray(self.j, dtype=np.int64)
        w = np.asarray(self.w, dtype=float)
        if not (i.shape == j.shape == w.shape and i.ndim == 1):
            raise GraphError("edge arrays must be 1-D and of equal length")
        if self.n < 1:
            raise GraphError(f"node count must be positive, got {self.n}")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        if np.any(lo == hi):
            raise GraphError("self-loops are not allowed")
        if lo.size and (lo.min() < 0 or hi.max() >= self.n):
            raise GraphError(f"node index out of range [0, {self.n})")
        if np.any(~np.isfinite(w)) or np.any(w <= 0) or np.any(w > 1):
            raise GraphError("edge weights must lie in (0, 1]")
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if lo.size > 1 and np.any((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])):
            raise GraphError("duplicate edge (multi-graphs are not supported)")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "i", _readonly(lo, np.int64))
        object.__setattr__(self, "j", _readonly(hi, np.int64))
        object.__setattr__(self, "w", _readonly(w, float))

    @classmethod
    def from_edges(cls, n, edges):
        """Build from an iterable of ``(i, j, w)`` triples in any order."""
        edges = list(edges)
        if not edges:
            return cls(n, np.empty(0), np.empty(0), np.empty(0))
        i, j, w = zip(*edges)
        return cls(n, np.array(i), np.array(j), np.array(w, dtype=float))

    def with_weights(self, w):
        """Same topology (canonical edge order) with a new weight vector."""
        return UndirectedGraph(self.n, self.i, self.j, w)

    @property
    def num_edges(self):
        return int(self.w.size)

    def edges(self):
        return list(zip(self.i.tolist(), self.j.tolist(), self.w.tolist()))

    @cached_property
    def adjacency(self):
        """Symmetric CSR adjacency matrix W."""
        rows = np.concatenate([self.i, self.j])
        cols = np.concatenate([self.j, self.i])
        vals = np.concatenate([self.w, self.w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def weight(self, a, b):
        return float(self.adjacency[a, b])

    def neighbors(self, v):
        W = self.adjacency
        return W.indices[W.indptr[v]:W.indptr[v + 1]]

    def degrees(self):
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def components(self):
        ncomp, labels = sp.csgraph.connected_components(self.adjacency, directed=False)
        return [np.flatnonzero(labels == c).tolist() for c in range(ncomp)]

    def is_connected(self):
        return len(self.components()) == 1

    def require_connected(self):
        comps = self.components()
        if len(comps) > 1:
            raise DisconnectedGraph(comps)
        return self


@dataclass(frozen=True, eq=False)
class Dag:
    """Directed graph with a designated source.

    Construction does not enforce acyclicity so that ``validate_dag`` can
    report on arbitrary arc sets; ``topo_order`` raises ``CycleDetected``.
    """

    n: int
    tail: np.ndarray
    head: np.ndarray
    w: np.ndarray
    source: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.tail, dtype=np.int64)
        h = np.asarray(self.head, dtype=np.int64)
        w = np.asarray(self.w, dtype=float)
        if not (t.shape == h.shape == w.shape and t.ndim == 1):
            raise GraphError("arc arrays must be 1-D and of equal length")
        if t.size and (min(t.min(), h.min()) < 0 or max(t.max(), h.max()) >= self.n):
            raise GraphError(f"node index out of range [0, {self.n})")
        if np.any(t == h):
            raise GraphError("self-loops are not allowed")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise GraphError("arc weights must be positive")
        if not 0 <= self.source < self.n:
            raise GraphError(f"source {self.source} out of range")
        order = np.lexsort((h, t))
        t, h, w = t[order], h[order], w[order]
        if t.size > 1 and np.any((t[1:] == t[:-1]) & (h[1:] == h[:-1])):
            raise GraphError("duplicate arc")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "source", int(self.source))
        object.__setattr__(self, "tail", _readonly(t, np.int64))
        object.__setattr__(self, "head", _readonly(h, np.int64))
        object.__setattr__(self, "w", _readonly(w, float))

    @classmethod
    def from_arcs(cls, n, arcs, source, **meta):
        arcs = list(arcs)
        if not arcs:
            return cls(n, np.empty(0), np.empty(0), np.empty(0), source, meta)
        t, h, w = zip(*arcs)
        return cls(n, np.array(t), np.array(h), np.array(w, dtype=float), source, meta)

    @property
    def num_arcs(self):
        return int(self.w.size)

    def arcs(self):
        return list(zip(self.tail.tolist(), self.head.tolist(), self.w.tolist()))

    @cached_property
    def adjacency(self):
        """CSR matrix with ``W[i, j]`` the weight of arc i -> j."""
        return sp.csr_matrix((self.w, (self.tail, self.head)), shape=(self.n, self.n))

    @cached_property
    def in_degree(self):
        """Weighted in-degree, the diagonal of the in-degree matrix."""
        return np.bincount(self.head, weights=self.w, minlength=self.n).astype(float)

    @cached_property
    def topo_order(self):
        return topo_sort(self)


def build_laplacian(g):
    """Combinatorial Laplacian ``D - W`` as a CSR matrix."""
    W = g.adjacency
    return (sp.diags(g.degrees()) - W).tocsr()


def build_directed_laplacian(d):
    """Directed Laplacian ``in_degree - W^T``; row i collects arcs entering i."""
    return (sp.diags(d.in_degree) - d.adjacency.T).tocsr()


def topo_sort(d):
    """Kahn's algorithm; ties go to the smallest ready node index."""
    indeg = np.bincount(d.head, minlength=d.n)
    out = [[] for _ in range(d.n)]
    for t, h in zip(d.tail.tolist(), d.head.tolist()):
        out[t].append(h)
    ready = [v for v in range(d.n) if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for u in out[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, u)
    if len(order) < d.n:
        raise CycleDetected(set(range(d.n)) - set(order))
    return np.array(order, dtype=np.int64)


def check_node(g, v):
    if not 0 <= int(v) < g.n:
        raise GraphError(f"node {v} out of range [0, {g.n})")
    return int(v)


def hop_distances(g, s):
    """Unweighted BFS hop counts from ``s``."""
    check_node(g, s)
    W = g.adjacency
    h = np.full(g.n, -1, dtype=np.int64)
    h[s] = 0
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for u in W.indices[W.indptr[v]:W.indptr[v + 1]]:
            if h[u] < 0:
                h[u] = h[v] + 1
                queue.append(u)
    missing = np.flatnonzero(h < 0)
    if missing.size:
        raise Unreachable(int(missing[0]))
    return h


@dataclass(frozen=True)
class ValidationReport:
    acyclic: bool
    single_source: bool
    all_reachable: bool
    extra_sources: tuple = ()
    unreachable: tuple = ()
    source_has_in_arcs: bool = False

    @property
    def ok(self):
        return self.acyclic and self.single_source and self.all_reachable

    def describe(self):
        if self.ok:
            return "valid"
        parts = []
        if not self.acyclic:
            parts.append("contains a directed cycle")
        if self.source_has_in_arcs:
            parts.append("source has incoming arcs")
        if self.extra_sources:
            parts.append(f"secondary sources {list(self.extra_sources)[:20]}")
        if self.unreachable:
            parts.append(f"unreachable nodes {list(self.unreachable)[:20]}")
        return "; ".join(parts)


def validate_dag(d):
    try:
        topo_sort(d)
        acyclic = True
    except CycleDetected:
        acyclic = False
    indeg = np.bincount(d.head, minlength=d.n)
    zero = np.flatnonzero(indeg == 0)
    extra = tuple(int(v) for v in zero if v != d.source)
    src_in = bool(indeg[d.source] > 0)
    _, reached = sp.csgraph.breadth_first_order(
        d.adjacency, d.source, directed=True, return_predecessors=True
    )
    unreachable = tuple(int(v) for v in np.flatnonzero(reached == -9999) if v != d.source)
    return ValidationReport(
        acyclic=acyclic,
        single_source=not extra and not src_in,
        all_reachable=not unreachable,
        extra_sources=extra,
        unreachable=unreachable,
        source_has_in_arcs=src_in,
    )
