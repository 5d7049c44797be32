"""Versioned text formats.  Line 1 of every file names its format and version.

ugraph v1     n=<N> line, then ``i<TAB>j<TAB>w`` rows with i < j
dag v1        source=<s> line, n=<N> line, then ``i<TAB>j<TAB>w`` rows (arc i -> j)
embed v1      K=<k> line, then ``i<TAB>p_1 ... p_K`` rows
fitted v1     labels=<comma list> line, then ``j<TAB>i<TAB>w`` rows (arc j -> i)
trajectory    ``# trajectory v1`` comment line, then CSV ``t,node_0,...``
simsignal     ``# simsignal v1 trials=<n>`` comment line, then the same CSV layout
JSON reports  one line, first key ``format``

Floats are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .diffusion import Trajectory
from .embedding import Embedding
from .graph_core import Dag, UndirectedGraph


class FormatError(ValueError):
    pass


def atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _f(x):
    return repr(float(x))


def _lines(path):
    with open(path) as fh:
        return [ln.rstrip("\n") for ln in fh]


def _expect(lines, header, path):
    if not lines or lines[0].strip() != header:
        got = lines[0].strip() if lines else "<empty>"
        raise FormatError(f"{path}: expected header {header!r}, got {got!r}")


def _kv(line, key, path):
    k, sep, v = line.partition("=")
    if not sep or k.strip() != key:
        raise FormatError(f"{path}: expected '{key}=' line, got {line!r}")
    return v.strip()


def _rows(lines, path, ncols=3):
    out = []
    for k, ln in enumerate(lines):
        if not ln.strip() or ln.startswith("#"):
            continue
        parts = ln.split("\t")
        if len(parts) != ncols:
            raise FormatError(f"{path}: row {k}: expected {ncols} tab-separated fields")
        try:
            out.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise FormatError(f"{path}: row {k}: {exc}") from exc
    return out


def format_ugraph(g):
    rows = [f"{i}\t{j}\t{_f(w)}" for i, j, w in g.edges()]
    return "\n".join(["ugraph v1", f"n={g.n}", *rows]) + "\n"


def write_ugraph(g, path):
    atomic_write(path, format_ugraph(g))


def read_ugraph(path):
    lines = _lines(path)
    _expect(lines, "ugraph v1", path)
    body = lines[1:]
    if body and body[0].startswith("n="):
        n = int(_kv(body[0], "n", path))
        body = body[1:]
        rows = _rows(body, path)
    else:
        rows = _rows(body, path)
        n = 1 + max(max(i, j) for i, j, _ in rows) if rows else 1
    for i, j, _ in rows:
        if i >= j:
            raise FormatError(f"{path}: rows must satisfy i < j, got {i}, {j}")
    return UndirectedGraph.from_edges(n, rows)


def format_dag(d):
    rows = [f"{i}\t{j}\t{_f(w)}" for i, j, w in d.arcs()]
    return "\n".join(["dag v1", f"source={d.source}", f"n={d.n}", *rows]) + "\n"


def write_dag(d, path):
    atomic_write(path, format_dag(d))


def read_dag(path):
    lines = _lines(path)
    _expect(lines, "dag v1", path)
    source = int(_kv(lines[1], "source", path))
    body = lines[2:]
    if body and body[0].startswith("n="):
        n = int(_kv(body[0], "n", path))
        rows = _rows(body[1:], path)
    else:
        rows = _rows(body, path)
        n = 1 + max([source] + [max(i, j) for i, j, _ in rows])
    return Dag.from_arcs(n, rows, source)


def format_embedding(emb):
    rows = ["\t".join([str(i)] + [_f(v) for v in row]) for i, row in enumerate(emb.P)]
    return "\n".join(["embed v1", f"K={emb.K}", *rows]) + "\n"


def write_embedding(emb, path):
    atomic_write(path, format_embedding(emb))


def read_embedding(path):
    lines = _lines(path)
    _expect(lines, "embed v1", path)
    K = int(_kv(lines[1], "K", path))
    P = []
    for k, ln in enumerate(lines[2:]):
        if not ln.strip():
            continue
        parts = ln.split("\t")
        if len(parts) != K + 1 or int(parts[0]) != len(P):
            raise FormatError(f"{path}: malformed embedding row {k}")
        P.append([float(x) for x in parts[1:]])
    return Embedding(P=np.array(P).reshape(len(P), K), meta={"file": os.fspath(path)})


def format_signal(times, X, kind="trajectory", extra=""):
    X = np.asarray(X)
    head = f"# {kind} v1" + (f" {extra}" if extra else "")
    cols = "t," + ",".join(f"node_{i}" for i in range(X.shape[1]))
    rows = [",".join([_f(t)] + [_f(v) for v in row]) for t, row in zip(times, X)]
    return "\n".join([head, cols, *rows]) + "\n"


def write_trajectory(traj, path):
    atomic_write(path, format_signal(traj.times, traj.X, "trajectory"))


def write_signal(sig, path):
    atomic_write(path, format_signal(sig.times, sig.F, "simsignal", f"trials={sig.trials}"))


def read_signal(path):
    """Trajectory-shaped object from either CSV flavour."""
    lines = [ln for ln in _lines(path) if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise FormatError(f"{path}: missing format line")
    kind = lines[0].lstrip("# ").split()[0]
    if kind not in ("trajectory", "simsignal"):
        raise FormatError(f"{path}: unknown signal format {lines[0]!r}")
    if not lines[1].startswith("t,"):
        raise FormatError(f"{path}: missing 't,node_0,...' header")
    try:
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(lines[1].split(",")):
        raise FormatError(f"{path}: ragged rows")
    X = data[:, 1:]
    return Trajectory(data[:, 0], X, X[0].copy(), {"kind": kind, "file": os.fspath(path)})


def format_fitted(W, labels):
    rows = [
        f"{j}\t{i}\t{_f(W[j, i])}"
        for j in range(W.shape[0])
        for i in range(W.shape[1])
        if W[j, i] != 0
    ]
    return "\n".join(["fitted v1", "labels=" + ",".join(labels), *rows]) + "\n"


def write_fitted(fit, path):
    labels = fit.labels or tuple(f"node_{i}" for i in range(fit.W.shape[0]))
    atomic_write(path, format_fitted(fit.W, labels))


def read_fitted(path):
    lines = _lines(path)
    _expect(lines, "fitted v1", path)
    labels = tuple(_kv(lines[1], "labels", path).split(","))
    W = np.zeros((len(labels), len(labels)))
    for j, i, w in _rows(lines[2:], path):
        W[j, i] = w
    return W, labels


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def format_json(fmt, payload):
    body = {"format": fmt, **to_jsonable(payload)}
    return json.dumps(body, separators=(",", ":"), allow_nan=False) + "\n"


def write_json(path, fmt, payload):
    atomic_write(path, format_json(fmt, payload))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
