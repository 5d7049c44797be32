"""Seeded lattice families and small fixed graphs used in experiments and tests.

Node numbering is row-major: ``r * cols + c`` in 2D and
``(x * ny + y) * nz + z`` in 3D.  Edge weights are drawn i.i.d. from the open
interval (0, 1) in canonical edge order (lexicographic by ``(i, j)``, i < j),
which is what makes a seed reproduce the same graph everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph_core import GraphError, UndirectedGraph
from .seeding import rng_for

KINDS = ("lattice2d-4", "lattice2d-8", "lattice2d-12", "lattice3d")

_OFFSETS = {
    "lattice2d-4": [(0, 1), (1, 0)],
    "lattice2d-8": [(0, 1), (1, 0), (1, 1), (1, -1)],
    # 8-neighbourhood plus the axial distance-2 neighbours
    "lattice2d-12": [(0, 1), (1, 0), (1, 1), (1, -1), (0, 2), (2, 0)],
    "lattice3d": [(0, 0, 1), (0, 1, 0), (1, 0, 0)],
}

# node counts used by the synthetic-graph protocol
STUDY_DIMS = {
    "lattice2d-4": [(10, 10), (15, 15), (20, 20)],
    "lattice2d-8": [(10, 10), (15, 15), (20, 20)],
    "lattice2d-12": [(10, 10), (15, 15), (20, 20)],
    "lattice3d": [(3, 6, 6), (3, 9, 9), (3, 12, 12)],
}

_MAX_NODES = 10_000_000


class BadDims(GraphError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    kind: str
    dims: tuple
    weight_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadDims(f"unknown lattice kind {self.kind!r}; expected one of {KINDS}")
        dims = tuple(int(x) for x in self.dims)
        want = 3 if self.kind == "lattice3d" else 2
        if len(dims) != want:
            raise BadDims(f"{self.kind} needs {want} dims, got {dims}")
        if any(x <= 0 for x in dims):
            raise BadDims(f"dims must be positive, got {dims}")
        if int(np.prod(dims, dtype=object)) > _MAX_NODES:
            raise BadDims(f"dims {dims} exceed {_MAX_NODES} nodes")
        object.__setattr__(self, "dims", dims)

    @property
    def n(self):
        return int(np.prod(self.dims))


def parse_dims(text):
    """``"10x10"`` -> ``(10, 10)``."""
    try:
        return tuple(int(p) for p in text.lower().split("x"))
    except ValueError as exc:
        raise BadDims(f"cannot parse dims {text!r}") from exc


def lattice_edges(kind, dims):
    """Canonically ordered ``(i, j)`` pairs of the unweighted lattice."""
    shape = tuple(dims)
    index = np.arange(int(np.prod(shape))).reshape(shape)
    pairs = []
    for off in _OFFSETS[kind]:
        src = tuple(slice(max(0, -o), s - max(0, o)) for o, s in zip(off, shape))
        dst = tuple(slice(max(0, o), s - max(0, -o)) for o, s in zip(off, shape))
        a, b = index[src].ravel(), index[dst].ravel()
        pairs.append(np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1))
    pairs = np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=np.int64)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def uniform_open(rng, size):
    """I.i.d. uniform draws on the open interval (0, 1)."""
    u = rng.random(size)
    while np.any(u == 0.0):
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    return u


def generate_lattice(spec):
    pairs = lattice_edges(spec.kind, spec.dims)
    w = uniform_open(rng_for(spec.weight_seed), len(pairs))
    return UndirectedGraph(spec.n, pairs[:, 0], pairs[:, 1], w)


def regenerate_weights(g, seed):
    """Fresh uniform(0, 1) weights on the same topology, deterministic in ``seed``."""
    return g.with_weights(uniform_open(rng_for(seed), g.num_edges))


def triangle_mesh(rows=5):
    """Triangular mesh with ``rows`` rows; rows=5 gives 15 nodes and 30 unit edges."""
    ids, k = {}, 0
    for r in range(rows):
        for c in range(r + 1):
            ids[r, c] = k
            k += 1
    edges = []
    for (r, c), v in ids.items():
        for nb in [(r, c + 1), (r + 1, c), (r + 1, c + 1)]:
            if nb in ids:
                edges.append((v, ids[nb], 1.0))
    return UndirectedGraph.from_edges(k, edges)


def triangle_mesh_coords(rows=5):
    """Planar positions of ``triangle_mesh`` nodes (equilateral spacing)."""
    pts = [(c - r / 2.0, -r * np.sqrt(3) / 2.0) for r in range(rows) for c in range(r + 1)]
    return np.array(pts)


def path_graph(n, w=1.0):
    return UndirectedGraph.from_edges(n, [(i, i + 1, w) for i in range(n - 1)])


def complete_graph(n, w=1.0):
    return UndirectedGraph.from_edges(n, [(i, j, w) for i, j in itertools.combinations(range(n), 2)])


def cycle_graph(n, w=1.0):
    return UndirectedGraph.from_edges(n, [(i, (i + 1) % n, w) for i in range(n)])
