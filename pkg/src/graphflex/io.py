"""File formats: FMTX/CSV feature matrices, edge-list text, label files.

FMTX is magic ``b"FMTX"``, two little-endian uint64 (n, d), then n*d
little-endian float64 row-major. Edge files hold one ``u v w`` line per
undirected edge with u < v; ``#`` lines are comments.
"""

from __future__ import annotations

import struct

import numpy as np

from .graph import Graph, build_graph

_MAGIC = b"FMTX"


def write_features(path, X: np.ndarray, fmt: str = "fmtx") -> None:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite entries")
    if fmt == "fmtx":
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<QQ", X.shape[0], X.shape[1]))
            f.write(X.tobytes())
    elif fmt == "csv":
        with open(path, "w") as f:
            f.write(",".join(f"f{j}" for j in range(X.shape[1])) + "\n")
            for row in X:
                f.write(",".join(repr(float(x)) for x in row) + "\n")
    else:
        raise ValueError(f"unknown feature format {fmt!r}")


def read_features(path) -> np.ndarray:
    """Read a feature matrix, sniffing FMTX magic vs. headered CSV."""
    with open(path, "rb") as f:
        head = f.read(4)
        if head == _MAGIC:
            meta = f.read(16)
            if len(meta) != 16:
                raise ValueError(f"{path}: truncated FMTX header")
            n, d = struct.unpack("<QQ", meta)
            payload = f.read(8 * n * d)
            if len(payload) != 8 * n * d:
                raise ValueError(f"{path}: truncated FMTX payload")
            X = np.frombuffer(payload, dtype="<f8").reshape(n, d).copy()
        else:
            f.seek(0)
            text = f.read().decode("utf-8").splitlines()
            if not text:
                raise ValueError(f"{path}: empty CSV")
            rows = [line.split(",") for line in text[1:] if line.strip()]
            try:
                X = np.array([[float(x) for x in row] for row in rows])
            except ValueError as e:
                raise ValueError(f"{path}: malformed CSV ({e})") from None
            if X.size == 0:
                X = X.reshape(0, len(text[0].split(",")))
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{path}: non-finite feature entries")
    return X


def write_edges(g: Graph, path) -> None:
    with open(path, "w") as f:
        f.write(f"# n={g.n}\n")
        for u, v, w in g.edge_array():
            f.write(f"{int(u)} {int(v)} {repr(float(w))}\n")


def read_edges(path, n: int) -> Graph:
    """Parse an edge text file into a graph on n nodes.

    Errors name the offending 1-based line number.
    """
    triples = []
    seen = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 'u v w'")
            try:
                u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed edge") from None
            if not (0 <= u < v < n):
                raise ValueError(f"{path}: line {lineno}: bad endpoints ({u}, {v}) for n={n}")
            if w <= 0 or not np.isfinite(w):
                raise ValueError(f"{path}: line {lineno}: bad weight {w}")
            if (u, v) in seen:
                raise ValueError(
                    f"{path}: line {lineno}: duplicate edge ({u}, {v}), first at line {seen[(u, v)]}"
                )
            seen[(u, v)] = lineno
            triples.append((u, v, w))
    return build_graph(n, triples)


def edge_file_node_count(path) -> int:
    """Node count from the '# n=...' header, else 1 + max id seen."""
    best = -1
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line.startswith("#"):
                if line.startswith("# n="):
                    return int(line[4:])
                continue
            if line:
                parts = line.split()
                best = max(best, int(parts[0]), int(parts[1]))
    return best + 1


def write_labels(path, labels) -> None:
    with open(path, "w") as f:
        for x in labels:
            f.write(f"{int(x)}\n")


def read_labels(path) -> np.ndarray:
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed label") from None
    return np.asarray(out, dtype=np.int64)
