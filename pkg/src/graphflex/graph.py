"""Sparse undirected weighted graphs in compressed-sparse-row form.

Graphs are immutable once built: every mutation (growing the node set,
adding edges) constructs a new value. Edges are stored twice, once per
direction, with column indices strictly increasing inside each row.
"""

from __future__ import annotations

import numpy as np

# Weights below this are numerical dust from the optimizers and are dropped.
WEIGHT_FLOOR = 1e-12


class Graph:
    """CSR adjacency: ``row_offsets`` (n+1), ``col_indices``, ``weights``.

    Invariants: symmetric, no self-loops, strictly increasing columns per
    row, all weights positive. Construct through :func:`build_graph`,
    :func:`induced_subgraph` or :func:`merge_edges`; the raw constructor
    trusts its inputs.
    """

    __slots__ = ("n", "row_offsets", "col_indices", "weights")

    def __init__(self, n, row_offsets, col_indices, weights):
        self.n = int(n)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        for a in (self.row_offsets, self.col_indices, self.weights):
            a.setflags(write=False)

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each edge is stored twice)."""
        return self.col_indices.shape[0] // 2

    def degrees(self) -> np.ndarray:
        """Weighted degree of every node."""
        out = np.zeros(self.n)
        np.add.at(out, self._rows(), self.weights)
        return out

    def degree_counts(self) -> np.ndarray:
        """Unweighted degree (neighbor count) of every node."""
        return np.diff(self.row_offsets)

    def neighbors(self, u: int) -> np.ndarray:
        lo, hi = self.row_offsets[u], self.row_offsets[u + 1]
        return self.col_indices[lo:hi]

    def neighbor_weights(self, u: int) -> np.ndarray:
        lo, hi = self.row_offsets[u], self.row_offsets[u + 1]
        return self.weights[lo:hi]

    def _rows(self) -> np.ndarray:
        """Row index of every CSR entry."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_offsets))

    def edge_array(self) -> np.ndarray:
        """All edges as an (m, 3) array of (u, v, w) rows with u < v, sorted."""
        rows = self._rows()
        keep = rows < self.col_indices
        out = np.empty((int(keep.sum()), 3))
        out[:, 0] = rows[keep]
        out[:, 1] = self.col_indices[keep]
        out[:, 2] = self.weights[keep]
        return out

    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(u), int(v), float(w)) for u, v, w in self.edge_array()]

    def total_weight(self) -> float:
        """Sum of undirected edge weights."""
        return float(self.weights.sum()) / 2.0

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


def _as_edge_array(edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("edge list must be a sequence of (u, v, w) triples")
    return arr


def _validate_edges(arr: np.ndarray, n: int) -> np.ndarray:
    """Check EdgeList invariants against node count n, drop dust weights."""
    u = arr[:, 0]
    v = arr[:, 1]
    w = arr[:, 2]
    if arr.size and (np.any(u != np.floor(u)) or np.any(v != np.floor(v))):
        raise ValueError("node ids must be integers")
    if arr.size and (np.any(u < 0) or np.any(u >= n) or np.any(v < 0) or np.any(v >= n)):
        raise ValueError(f"edge endpoint out of range for n={n}")
    if arr.size and np.any(u >= v):
        raise ValueError("edges must satisfy u < v (no self-loops, one row per pair)")
    if arr.size and np.any(w <= 0):
        raise ValueError("edge weights must be positive")
    if arr.size:
        key = u.astype(np.int64) * np.int64(n) + v.astype(np.int64)
        if np.unique(key).shape[0] != key.shape[0]:
            raise ValueError("duplicate edge in edge list")
    return arr[w >= WEIGHT_FLOOR]


def _csr_from_canonical(n: int, arr: np.ndarray) -> Graph:
    """Build CSR from a validated (u<v, unique) edge array."""
    u = arr[:, 0].astype(np.int64)
    v = arr[:, 1].astype(np.int64)
    w = arr[:, 2]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    ws = np.concatenate([w, w])
    order = np.lexsort((cols, rows))
    rows, cols, ws = rows[order], cols[order], ws[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    np.cumsum(offsets, out=offsets)
    return Graph(n, offsets, cols, ws)


def build_graph(n: int, edges) -> Graph:
    """Build a graph on n nodes from an edge list of (u, v, w) with u < v.

    Raises ValueError on out-of-range ids, duplicate pairs, self-loops or
    nonpositive weights. Weights under ``WEIGHT_FLOOR`` are dropped.
    """
    if n < 0:
        raise ValueError("node count must be nonnegative")
    arr = _validate_edges(_as_edge_array(edges), n)
    return _csr_from_canonical(n, arr)


def induced_subgraph(g: Graph, nodes) -> tuple[Graph, np.ndarray]:
    """Subgraph on the given distinct node ids.

    Returns ``(sub, old_ids)`` where ``old_ids[new] = old`` is the
    sorted-position map: new ids follow the ascending order of ``nodes``.
    Built by gathering the selected CSR rows directly, so cost scales with
    the selected nodes' degrees rather than the whole graph.
    """
    ids = np.asarray(nodes, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= g.n):
        raise ValueError("subgraph node id out of range")
    old_ids = np.unique(ids)
    if old_ids.shape[0] != ids.shape[0]:
        raise ValueError("subgraph node ids must be distinct")
    m = old_ids.shape[0]
    if m == 0:
        return Graph(0, np.zeros(1, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)), old_ids
    starts = g.row_offsets[old_ids]
    lens = g.row_offsets[old_ids + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return Graph(m, np.zeros(m + 1, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)), old_ids
    # ragged gather of every selected row's CSR span
    pos = np.repeat(starts - np.r_[np.int64(0), np.cumsum(lens)[:-1]], lens) + np.arange(total)
    cols = g.col_indices[pos]
    ws = g.weights[pos]
    new_rows = np.repeat(np.arange(m, dtype=np.int64), lens)
    loc = np.searchsorted(old_ids, cols)
    loc_c = np.minimum(loc, m - 1)
    keep = old_ids[loc_c] == cols
    new_rows, new_cols, ws = new_rows[keep], loc_c[keep], ws[keep]
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.add.at(offsets, new_rows + 1, 1)
    np.cumsum(offsets, out=offsets)
    return Graph(m, offsets, new_cols, ws), old_ids


def merge_edges(g: Graph, additional, new_n: int) -> Graph:
    """Grow g to ``new_n`` nodes and add edges; duplicates keep the max weight."""
    if new_n < g.n:
        raise ValueError("new_n must not shrink the graph")
    extra = _validate_edges(_as_edge_array(additional), new_n)
    combined = np.vstack([g.edge_array(), extra])
    if combined.shape[0]:
        key = combined[:, 0].astype(np.int64) * np.int64(new_n) + combined[:, 1].astype(np.int64)
        order = np.argsort(key, kind="stable")
        combined, key = combined[order], key[order]
        group_start = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        w_max = np.maximum.reduceat(combined[:, 2], group_start)
        combined = combined[group_start]
        combined[:, 2] = w_max
    return _csr_from_canonical(new_n, combined)


def canonical_edges(u, v, w, n: int | None = None) -> np.ndarray:
    """Normalize raw (u, v, w) triples: orient u < v, drop self-loops and
    dust, and collapse duplicates keeping the max weight."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    keep = (lo != hi) & (w >= WEIGHT_FLOOR)
    lo, hi, w = lo[keep], hi[keep], w[keep]
    if lo.size == 0:
        return np.empty((0, 3))
    span = int(hi.max()) + 1 if n is None else int(n)
    key = lo * np.int64(span) + hi
    order = np.argsort(key, kind="stable")
    lo, hi, w, key = lo[order], hi[order], w[order], key[order]
    group_start = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    out = np.empty((group_start.shape[0], 3))
    out[:, 0] = lo[group_start]
    out[:, 1] = hi[group_start]
    out[:, 2] = np.maximum.reduceat(w, group_start)
    return out


def validate_graph(g: Graph) -> None:
    """Assert every Graph invariant; used by tests and debug paths."""
    assert g.row_offsets.shape == (g.n + 1,)
    assert g.row_offsets[0] == 0 and g.row_offsets[-1] == g.col_indices.shape[0]
    assert np.all(np.diff(g.row_offsets) >= 0)
    assert g.col_indices.shape == g.weights.shape
    assert np.all(g.weights > 0)
    rows = g._rows()
    assert not np.any(rows == g.col_indices), "self-loop found"
    for u in range(g.n):
        cols = g.neighbors(u)
        assert np.all(np.diff(cols) > 0), "columns not strictly increasing"
    # symmetry with identical weights
    fwd = {(int(a), int(b)): float(w) for a, b, w in zip(rows, g.col_indices, g.weights)}
    for (a, b), w in fwd.items():
        assert fwd.get((b, a)) == w, "asymmetric edge"
