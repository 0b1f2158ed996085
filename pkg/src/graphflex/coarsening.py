"""LSH-based coarsening: random-projection binning into supernodes, the
coarse candidate expansion, and the projection collision probabilities.

A node's bin is the most frequent value among its h quantized projections
floor((w_j . x + b_j) / r_bin), ties resolved to the smallest value. Bin
width r_bin controls the supernode count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .graph import Graph, build_graph

_INV_SQRT2PI2 = 2.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class LshFamily:
    """h random projections with uniform offsets and a shared bin width."""

    d: int
    h: int
    r_bin: float
    W: np.ndarray  # (h, d) iid standard normal
    b: np.ndarray  # (h,) uniform in [0, r_bin)
    seed: int = 0

    def __post_init__(self):
        if self.r_bin <= 0:
            raise ValueError("r_bin must be positive")
        if self.h < 1:
            raise ValueError("need at least one hash function")
        if self.W.shape != (self.h, self.d) or self.b.shape != (self.h,):
            raise ValueError("W must be (h, d) and b must be (h,)")

    @classmethod
    def generate(cls, d: int, h: int, r_bin: float, seed: int = 0) -> "LshFamily":
        rng = np.random.default_rng(seed)
        W = rng.standard_normal((h, d))
        b = rng.uniform(0.0, r_bin, size=h)
        return cls(d=d, h=h, r_bin=r_bin, W=W, b=b, seed=seed)


def auto_bin_width(X: np.ndarray, seed: int = 0) -> float:
    """Default bin width: median pairwise distance of a 256-row sample / 4."""
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=min(256, n), replace=False) if n > 1 else np.arange(n)
    S = X[np.sort(idx)]
    sq = np.einsum("ij,ij->i", S, S)
    D = sq[:, None] + sq[None, :] - 2.0 * (S @ S.T)
    iu, ju = np.triu_indices(S.shape[0], k=1)
    if iu.size == 0:
        return 1.0
    med = float(np.sqrt(np.median(np.maximum(D[iu, ju], 0.0))))
    return max(med, 1e-12) / 4.0


def lsh_bins(fam: LshFamily, X: np.ndarray) -> np.ndarray:
    """Bin id per row of X, densified to 0..s-1 in first-occurrence order."""
    if X.shape[1] != fam.d:
        raise ValueError(f"feature dim {X.shape[1]} does not match family dim {fam.d}")
    buckets = np.floor((X @ fam.W.T + fam.b) / fam.r_bin).astype(np.int64)  # (n, h)
    counts = (buckets[:, :, None] == buckets[:, None, :]).sum(-1)
    top = counts.max(axis=1, keepdims=True)
    cand = np.where(counts == top, buckets, np.iinfo(np.int64).max)
    raw = cand.min(axis=1)
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inverse]


@dataclass
class Coarsening:
    """Partition of a community into supernodes plus the aggregated graph.

    ``member_lists[s]`` holds the sorted community-local node ids mapped to
    supernode s; ``super_features`` are member means; coarse edge weights
    sum the original cross-supernode weights, with the self-loop mass that
    aggregation produces dropped but accounted in ``self_loop_weight``.
    """

    node_to_super: np.ndarray
    super_count: int
    super_features: np.ndarray
    coarse_graph: Graph
    member_lists: list[np.ndarray]
    self_loop_weight: float = 0.0


def coarsen(g_comm: Graph, X_comm: np.ndarray, fam: LshFamily) -> Coarsening:
    """Group a community's nodes into supernodes by their LSH bin."""
    if g_comm.n != X_comm.shape[0]:
        raise ValueError("graph and feature row counts differ")
    bins = lsh_bins(fam, X_comm) if g_comm.n else np.empty(0, dtype=np.int64)
    return _assemble(g_comm, X_comm, bins)


def identity_coarsening(g_comm: Graph, X_comm: np.ndarray) -> Coarsening:
    """Degenerate coarsening with every node its own supernode."""
    return _assemble(g_comm, X_comm, np.arange(g_comm.n, dtype=np.int64))


def _assemble(g: Graph, X: np.ndarray, bins: np.ndarray) -> Coarsening:
    s = int(bins.max()) + 1 if bins.size else 0
    order = np.argsort(bins, kind="stable")  # member ids stay ascending per bin
    counts = np.bincount(bins, minlength=s)
    members = np.split(order, np.cumsum(counts)[:-1])
    feats = np.zeros((s, X.shape[1]))
    np.add.at(feats, bins, X)
    feats /= np.maximum(counts, 1)[:, None]

    rows = g._rows()
    su = bins[rows]
    sv = bins[g.col_indices]
    cross = su < sv  # picks each undirected edge exactly once
    self_mass = float(g.weights[su == sv].sum()) / 2.0
    if np.any(cross):
        key = su[cross] * np.int64(s) + sv[cross]
        order = np.argsort(key, kind="stable")
        key_sorted = key[order]
        w_sorted = g.weights[cross][order]
        starts = np.flatnonzero(np.r_[True, key_sorted[1:] != key_sorted[:-1]])
        sums = np.add.reduceat(w_sorted, starts)
        coarse_edges = np.column_stack([key_sorted[starts] // s, key_sorted[starts] % s, sums])
    else:
        coarse_edges = np.empty((0, 3))
    cg = build_graph(s, coarse_edges)
    return Coarsening(
        node_to_super=bins,
        super_count=s,
        super_features=feats,
        coarse_graph=cg,
        member_lists=members,
        self_loop_weight=self_mass,
    )


def candidate_set(c: Coarsening, coarse_edges_of_incoming: dict) -> dict:
    """Expand each incoming node's connected supernodes to the sorted union
    of their member lists (the restricted search space for final learning)."""
    out = {}
    for node, supers in coarse_edges_of_incoming.items():
        ids = sorted(int(s) for s in supers)
        for s in ids:
            if s < 0 or s >= c.super_count:
                raise ValueError(f"unknown supernode id {s}")
        if ids:
            out[node] = np.unique(np.concatenate([c.member_lists[s] for s in ids]))
        else:
            out[node] = np.empty(0, dtype=np.int64)
    return out


def collision_bound(c_dist: float, r_bin: float) -> float:
    """Closed-form upper bound on the single-hash collision probability of
    two points at distance c, clamped to [0, 1]."""
    if r_bin <= 0:
        raise ValueError("r_bin must be positive")
    if c_dist < 0:
        raise ValueError("distance must be nonnegative")
    if c_dist == 0:
        return 1.0
    val = 1.0 - _INV_SQRT2PI2 * (c_dist / r_bin) * (1.0 - math.exp(-(r_bin**2) / (2.0 * c_dist**2)))
    return min(1.0, max(0.0, val))


def collision_exact(c_dist: float, r_bin: float) -> float:
    """Exact single-hash collision probability:
    int_0^r (1/c) f2(t/c) (1 - t/r) dt with f2 the folded Gaussian kernel.

    Evaluated as the difference of its two parts: the kernel mass term by
    adaptive quadrature (capped at its analytic limit of 1), the linear
    term in closed form. That keeps exact <= bound true in floating point
    even where the two agree beyond machine precision (c << r)."""
    if r_bin <= 0:
        raise ValueError("r_bin must be positive")
    if c_dist < 0:
        raise ValueError("distance must be nonnegative")
    if c_dist == 0:
        return 1.0

    def kernel(t):
        x = t / c_dist
        return (1.0 / c_dist) * _INV_SQRT2PI2 * math.exp(-0.5 * x * x)

    s1, _ = quad(kernel, 0.0, r_bin, epsabs=1e-12, epsrel=1e-12, limit=200)
    s1 = min(s1, 1.0)
    s2 = _INV_SQRT2PI2 * (c_dist / r_bin) * (1.0 - math.exp(-(r_bin**2) / (2.0 * c_dist**2)))
    return min(1.0, max(0.0, s1 - s2))
