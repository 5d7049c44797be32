"""Latent coordinates for graph nodes.

The proposed embedding ("EV") takes the bottom eigenvectors of

    A = L - mu * Q + eps * I

where L is the graph Laplacian and Q is a Laplacian-structured repulsion
matrix over disconnected two-hop pairs.  ``eps`` is the second-smallest
eigenvalue of Q and ``mu`` is the largest step that keeps every Gershgorin
disc of A in the right half-line, so A is PSD by construction.

Laplacian eigenmaps (LE) and locally linear embedding (LLE) are provided as
baselines.  All three share one eigen-solver: since L, Q and the LLE cost
matrix all annihilate the constant vector, we restrict the search to its
orthogonal complement, which drops the uninformative constant coordinate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .graph_core import build_laplacian
from .seeding import rng_for


class SolverFailure(RuntimeError):
    pass


class DimensionTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TwoHopStructure:
    """Disconnected two-hop neighbour sets and the aggregate matrix Q."""

    sets: tuple
    counts: np.ndarray
    Q: sp.csr_matrix


@dataclass(frozen=True)
class EmbeddingParams:
    K: int = 2
    tol: float = 1e-8
    maxiter: int = 2000
    seed: int = 0
    method: str = "auto"  # auto | lobpcg | dense


@dataclass(frozen=True, eq=False)
class Embedding:
    """``P`` is N x K; row i is node i's coordinate, column k is coordinate k."""

    P: np.ndarray
    eigenvalues: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.P.shape[0]

    @property
    def K(self):
        return self.P.shape[1]


def two_hop_structure(g):
    B = g.adjacency.copy()
    B.data[:] = 1.0
    reach2 = (B @ B).tocsr()
    reach2.data[:] = 1.0
    T = (reach2 - B.multiply(reach2)).tolil()
    T.setdiag(0)
    T = T.tocsr()
    T.eliminate_zeros()
    sets = tuple(np.sort(T.indices[T.indptr[i]:T.indptr[i + 1]]) for i in range(g.n))
    counts = np.array([len(s) for s in sets], dtype=np.int64)

    # Theta_i is the Laplacian of a star from i to T_i with weight 1/|T_i|,
    # so Q is the Laplacian of the pair weights 1/|T_i| + 1/|T_j|
    inv = np.zeros(g.n)
    inv[counts > 0] = 1.0 / counts[counts > 0]
    T = T.tocoo()
    C = sp.csr_matrix((inv[T.row] + inv[T.col], (T.row, T.col)), shape=(g.n, g.n))
    Q = (sp.diags(np.asarray(C.sum(axis=1)).ravel()) - C).tocsr()
    return TwoHopStructure(sets=sets, counts=counts, Q=Q)


def select_epsilon(Q):
    """Second-smallest eigenvalue of Q; round-off below 1e-12 * ||Q||_inf reads as 0."""
    n = Q.shape[0]
    if n < 2:
        return 0.0
    scale = max(1.0, float(abs(sp.csr_matrix(Q)).sum(axis=1).max()))
    if n <= 2000:
        vals = sla.eigvalsh(_dense(Q), subset_by_index=[0, 1])
    else:
        shift = 1e-6 * scale
        try:
            vals = spla.eigsh(Q.tocsc(), k=2, sigma=-shift, which="LM", return_eigenvectors=False)
        except spla.ArpackNoConvergence as exc:
            raise SolverFailure(f"eigensolver did not converge computing epsilon: {exc}") from exc
    eps = float(np.sort(vals)[1])
    return eps if eps > 1e-12 * scale else 0.0


def select_mu(L, Q, eps):
    """Smallest per-row mu that puts the row's Gershgorin left end at zero.

    Rows with no two-hop mass (zero denominator) impose no constraint.  With
    Q == 0 every row is skipped and mu falls back to 0.
    """
    L, Q = sp.csr_matrix(L), sp.csr_matrix(Q)
    qd, ld = Q.diagonal(), L.diagonal()
    q_off = np.asarray(Q.sum(axis=1)).ravel() - qd
    l_off = np.asarray(L.sum(axis=1)).ravel() - ld
    denom = qd - q_off
    numer = ld + l_off + eps
    valid = denom > 0
    if not np.any(valid):
        return 0.0
    return max(float(np.min(numer[valid] / denom[valid])), 0.0)


def build_A(g, two_hop=None):
    """Return ``(A, L, Q, eps, mu)`` for graph ``g``."""
    L = build_laplacian(g)
    th = two_hop if two_hop is not None else two_hop_structure(g)
    eps = select_epsilon(th.Q)
    mu = select_mu(L, th.Q, eps)
    A = (L - mu * th.Q + eps * sp.identity(g.n, format="csr")).tocsr()
    return A, L, th.Q, eps, mu


def gershgorin_left_ends(M):
    """Disc centre minus radius for every row of M."""
    if sp.issparse(M):
        M = sp.csr_matrix(M)
        d = M.diagonal()
        radius = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(d)
    else:
        M = np.asarray(M)
        d = np.diag(M)
        radius = np.abs(M).sum(axis=1) - np.abs(d)
    return d - radius


def canonicalize_signs(P):
    """Flip each column so its largest-magnitude entry is positive."""
    P = np.array(P, dtype=float, copy=True)
    for k in range(P.shape[1]):
        if P[np.argmax(np.abs(P[:, k])), k] < 0:
            P[:, k] = -P[:, k]
    return P


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def _complement_basis(n):
    # orthonormal basis of the subspace orthogonal to the constant vector
    return sla.null_space(np.ones((1, n)))


def _bottom_dense(A, K):
    B = _complement_basis(A.shape[0])
    vals, vecs = sla.eigh(B.T @ _dense(A) @ B, subset_by_index=[0, K - 1])
    return vals, B @ vecs


def _bottom_lobpcg(A, K, params):
    n = A.shape[0]
    A = sp.csr_matrix(A)
    ones = np.ones((n, 1)) / np.sqrt(n)
    rng = rng_for(params.seed, 0xE1)
    X = rng.standard_normal((n, K))
    X -= ones @ (ones.T @ X)
    X, _ = np.linalg.qr(X)

    # shifted sparse LU as preconditioner; the shift keeps it nonsingular
    shift = 1e-3 * max(float(A.diagonal().max()), 1e-12)
    lu = spla.splu((A + shift * sp.identity(n)).tocsc())
    M = spla.LinearOperator((n, n), matvec=lu.solve, matmat=lu.solve, dtype=float)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, vecs = spla.lobpcg(
            A, X, M=M, Y=ones, tol=params.tol, maxiter=params.maxiter, largest=False
        )

    # Rayleigh-Ritz on the returned block: exact orthonormality, sorted pairs
    V = vecs - ones @ (ones.T @ vecs)
    V, _ = np.linalg.qr(V)
    vals, W = sla.eigh(V.T @ (A @ V))
    V = V @ W
    resid = np.linalg.norm(A @ V - V * vals, axis=0)
    scale = max(1.0, float(abs(A).sum(axis=1).max()))
    if np.any(resid > 1e3 * params.tol * scale):
        raise SolverFailure(
            f"LOBPCG did not converge in {params.maxiter} iterations "
            f"(max residual {resid.max():.3e})"
        )
    return vals, V


def bottom_eigenvectors(A, K, params=None):
    """K smallest eigenpairs of symmetric A restricted to the complement of 1."""
    params = params or EmbeddingParams(K=K)
    n = A.shape[0]
    if K < 1:
        raise DimensionTooLarge(f"K must be positive, got {K}")
    if K >= n:
        raise DimensionTooLarge(f"K={K} must be smaller than the node count {n}")
    method = params.method
    if method == "auto":
        method = "lobpcg" if n >= 5 * K + 16 else "dense"
    if method == "dense":
        vals, V = _bottom_dense(A, K)
    elif method == "lobpcg":
        vals, V = _bottom_lobpcg(A, K, params)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    return np.asarray(vals), canonicalize_signs(V), method


def embed(g, K=2, params=None):
    """Proposed embedding: bottom non-constant eigenvectors of A."""
    params = params or EmbeddingParams(K=K)
    A, _, _, eps, mu = build_A(g)
    vals, P, method = bottom_eigenvectors(A, K, params)
    return Embedding(P=P, eigenvalues=vals, meta={"method": "ev", "epsilon": eps, "mu": mu, "solver": method})


def embed_le(g, K=2, params=None):
    """Laplacian eigenmaps: eigenvectors of L for the K smallest nonzero eigenvalues."""
    params = params or EmbeddingParams(K=K)
    vals, P, method = bottom_eigenvectors(build_laplacian(g), K, params)
    return Embedding(P=P, eigenvalues=vals, meta={"method": "le", "solver": method})


def lle_features(g):
    """Node features for LLE: shortest-path distances with edge length 1/W."""
    W = g.adjacency.copy()
    W.data = 1.0 / W.data
    return csgraph.shortest_path(W, method="D", directed=False)


def lle_weights(g, K, k_nn=None, reg=1e-3, X=None):
    """Row-stochastic reconstruction weights over graph neighbours."""
    X = lle_features(g) if X is None else X
    n = g.n
    rows, cols, vals = [], [], []
    for i in range(n):
        nbrs = g.neighbors(i)
        if k_nn is not None and len(nbrs) > k_nn:
            wts = np.asarray(g.adjacency[i, nbrs].todense()).ravel()
            nbrs = np.sort(nbrs[np.argsort(-wts, kind="stable")[:k_nn]])
        Z = X[nbrs] - X[i]
        G = Z @ Z.T
        k = len(nbrs)
        tr = np.trace(G)
        if k > K:
            G = G + reg * (tr if tr > 0 else 1.0) * np.eye(k)
        try:
            w = sla.solve(G, np.ones(k), assume_a="pos")
        except (sla.LinAlgError, ValueError):
            w = sla.solve(G + reg * (tr if tr > 0 else 1.0) * np.eye(k), np.ones(k))
        w /= w.sum()
        rows.extend([i] * k)
        cols.extend(nbrs.tolist())
        vals.extend(w.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def embed_lle(g, K=2, k_nn=None, params=None):
    params = params or EmbeddingParams(K=K)
    Wr = lle_weights(g, K, k_nn)
    IW = sp.identity(g.n, format="csr") - Wr
    M = (IW.T @ IW).tocsr()
    vals, P, method = bottom_eigenvectors(M, K, params)
    return Embedding(P=P, eigenvalues=vals, meta={"method": "lle", "solver": method})


EMBEDDERS = {"ev": embed, "le": embed_le, "lle": embed_lle}


def edge_length_cv(g, emb):
    """Coefficient of variation of latent lengths over graph edges."""
    d = np.linalg.norm(emb.P[g.i] - emb.P[g.j], axis=1)
    return float(d.std() / d.mean())
