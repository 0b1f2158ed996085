"""Evaluation metrics: partition quality on a graph (modularity,
conductance), agreement between labelings (NMI), edge-set precision /
recall / F1, and the collision probability table used to sanity-check the
candidate-preservation bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coarsening import collision_bound, collision_exact
from .graph import Graph


@dataclass
class EdgeMetrics:
    precision: float
    recall: float
    f1: float
    true_edges: int
    learned_edges: int
    common: int


def modularity(g: Graph, labels) -> float:
    """Intra-community edge mass minus its degree-model expectation,
    normalized by twice the total edge weight."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != g.n:
        raise ValueError("labels length must equal node count")
    two_m = float(g.weights.sum())
    if two_m == 0:
        raise ValueError("modularity undefined on an empty graph")
    rows = g._rows()
    intra = float(g.weights[labels[rows] == labels[g.col_indices]].sum())
    deg = g.degrees()
    vols = np.bincount(labels, weights=deg)
    return intra / two_m - float(((vols / two_m) ** 2).sum())


def conductance(g: Graph, labels) -> float:
    """Volume-weighted mean over communities of cut(c) / min(vol(c),
    vol(rest))."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != g.n:
        raise ValueError("labels length must equal node count")
    present = np.unique(labels)
    if present.shape[0] < 2:
        raise ValueError("conductance needs at least two communities")
    deg = g.degrees()
    total_vol = float(deg.sum())
    rows = g._rows()
    cut_mask = labels[rows] != labels[g.col_indices]
    num = 0.0
    for c in present:
        vol = float(deg[labels == c].sum())
        denom = min(vol, total_vol - vol)
        if denom == 0:
            raise ValueError(f"community {c} or its complement has zero volume")
        cut = float(g.weights[cut_mask & (labels[rows] == c)].sum())
        num += vol * (cut / denom)
    return num / total_vol


def nmi(a, b) -> float:
    """Normalized mutual information with sqrt-of-entropy-product
    normalization and natural logs. Zero-entropy sides return 1 when the
    partitions are identical, else 0."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("label arrays must have equal length")
    if a.shape[0] < 1:
        raise ValueError("need at least one label")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    joint = np.zeros((ka, kb))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= a.shape[0]
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    ha = -float(np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    hb = -float(np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    if ha == 0.0 or hb == 0.0:
        return 1.0 if ha == hb == 0.0 else 0.0
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])))
    return min(1.0, max(0.0, mi / math.sqrt(ha * hb)))


def _edge_keys(g: Graph) -> set[tuple[int, int]]:
    arr = g.edge_array()
    return {(int(u), int(v)) for u, v, _ in arr}


def edge_prf(learned: Graph, truth: Graph) -> EdgeMetrics:
    """Unweighted set comparison of undirected edge sets."""
    if learned.n != truth.n:
        raise ValueError("graphs must share a node count")
    ls = _edge_keys(learned)
    ts = _edge_keys(truth)
    common = len(ls & ts)
    precision = common / len(ls) if ls else 0.0
    recall = common / len(ts) if ts else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EdgeMetrics(precision, recall, f1, len(ts), len(ls), common)


def bound_table(r_bin: float, c_grid, trials: int = 100_000, seed: int = 0) -> list[dict]:
    """Rows of (c, exact, bound, empirical) for the single-hash collision
    probability at each distance in c_grid. Empirical draws ``trials``
    random (projection, offset) pairs per distance."""
    rng = np.random.default_rng(seed)
    rows = []
    for c in np.asarray(c_grid, dtype=np.float64):
        if c <= 0:
            raise ValueError("c grid must be positive")
        proj = rng.normal(0.0, c, size=trials)  # projected pair difference
        off = rng.uniform(0.0, r_bin, size=trials)
        hits = (proj + off >= 0.0) & (proj + off < r_bin)
        rows.append(
            {
                "c": float(c),
                "exact": collision_exact(float(c), r_bin),
                "bound": collision_bound(float(c), r_bin),
                "empirical": float(hits.mean()),
            }
        )
    return rows
