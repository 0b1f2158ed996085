"""Synthetic datasets: degree-corrected block models, small-world rings,
heterophily-controlled graphs, geometric/grid graphs and Gaussian blobs.

Every generator is a pure function of its parameters and seed. Features
for the label-bearing generators are class-conditional isotropic
Gaussians: class c has mean ``sep * e_c`` in R^d with identity covariance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, build_graph, canonical_edges


@dataclass(frozen=True)
class DcsbmParams:
    """Degree-corrected stochastic block model.

    Pair (i, j) is edged with probability ``min(1, rho * theta_i * theta_j
    * P[c_i, c_j])``. Each node draws a (label, theta) pair from the joint
    distribution ``pi`` over k labels and the discrete theta support.
    """

    n: int
    k: int
    P: np.ndarray
    rho: float
    theta_values: np.ndarray = field(default_factory=lambda: np.array([0.75, 1.25]))
    pi: np.ndarray | None = None  # (k, m) joint over (label, theta); None = uniform
    seed: int = 0

    def joint(self) -> np.ndarray:
        m = len(self.theta_values)
        if self.pi is None:
            return np.full((self.k, m), 1.0 / (self.k * m))
        return np.asarray(self.pi, dtype=np.float64)

    @property
    def lambda_n(self) -> float:
        """Sparsity scale: average degree grows like n * rho (up to the
        class-weighted mean of P)."""
        return self.n * self.rho

    def validate(self) -> None:
        P = np.asarray(self.P, dtype=np.float64)
        if P.shape != (self.k, self.k) or not np.allclose(P, P.T):
            raise ValueError("P must be a symmetric k x k matrix")
        if np.any(P < 0):
            raise ValueError("P entries must be nonnegative")
        pi = self.joint()
        if pi.shape != (self.k, len(self.theta_values)):
            raise ValueError("pi must be shaped (k, len(theta_values))")
        if np.any(pi < 0) or not np.isclose(pi.sum(), 1.0):
            raise ValueError("pi must be a distribution")
        if np.any(np.asarray(self.theta_values) < 0):
            raise ValueError("theta values must be nonnegative")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")


@dataclass
class LabeledDataset:
    """Feature matrix + class labels, with the ground-truth graph when the
    generator defines one."""

    features: np.ndarray
    labels: np.ndarray
    graph: Graph | None = None

    def __post_init__(self):
        if len(self.labels) != self.features.shape[0]:
            raise ValueError("labels length must match feature rows")
        if self.graph is not None and self.graph.n != self.features.shape[0]:
            raise ValueError("graph size must match feature rows")


def class_features(labels: np.ndarray, d: int, sep: float, rng: np.random.Generator) -> np.ndarray:
    """Class-conditional Gaussian features, mean sep*e_c, unit covariance."""
    labels = np.asarray(labels, dtype=np.int64)
    X = rng.standard_normal((labels.shape[0], d))
    k = int(labels.max()) + 1 if labels.size else 0
    if k > d:
        raise ValueError(f"feature dim {d} too small for {k} classes")
    X[np.arange(labels.shape[0]), labels] += sep
    return X


def gen_blobs(n: int, classes: int, d: int = 32, sep: float = 6.0, seed: int = 0) -> LabeledDataset:
    """Gaussian mixture with near-equal class sizes and no graph."""
    rng = np.random.default_rng(seed)
    labels = np.sort(np.arange(n) % classes)
    return LabeledDataset(class_features(labels, d, sep, rng), labels)


def gen_dcsbm(p: DcsbmParams, d: int = 32, sep: float = 1.0) -> LabeledDataset:
    """Sample a DC-SBM graph with Gaussian mixture features.

    Probabilities that exceed 1 after the theta/P scaling are clipped and
    counted; a nonzero count raises a warning, never a failure.
    """
    p.validate()
    rng = np.random.default_rng(p.seed)
    pi = p.joint().ravel()
    m = len(p.theta_values)
    pair_idx = rng.choice(pi.shape[0], size=p.n, p=pi)
    labels = pair_idx // m
    theta = np.asarray(p.theta_values, dtype=np.float64)[pair_idx % m]
    P = np.asarray(p.P, dtype=np.float64)

    us, vs = [], []
    clipped = 0
    # row-blocked Bernoulli sampling over the upper triangle
    block = max(1, int(2e6) // max(p.n, 1))
    for i0 in range(0, p.n, block):
        i1 = min(i0 + block, p.n)
        rows = np.arange(i0, i1)
        prob = p.rho * theta[rows, None] * theta[None, :] * P[np.ix_(labels[rows], labels)]
        clipped += int(np.count_nonzero(prob > 1.0))
        np.clip(prob, 0.0, 1.0, out=prob)
        mask = rng.random(prob.shape) < prob
        mask &= rows[:, None] < np.arange(p.n)[None, :]
        bi, bj = np.nonzero(mask)
        us.append(rows[bi])
        vs.append(bj)
    if clipped:
        warnings.warn(f"{clipped} pair probabilities clipped to 1", stacklevel=2)
    u = np.concatenate(us) if us else np.empty(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.empty(0, dtype=np.int64)
    g = build_graph(p.n, canonical_edges(u, v, np.ones(u.shape[0]), n=p.n))
    X = class_features(labels, d, sep, rng)
    return LabeledDataset(X, labels, g)


def gen_small_world(
    n: int,
    k_ring: int,
    p_rewire: float,
    classes: int,
    seed: int = 0,
    d: int = 32,
    sep: float = 1.0,
) -> LabeledDataset:
    """Ring-rewire small-world graph with exactly n*k_ring/2 edges.

    Labels are contiguous blocks of near-equal size; features are the
    class-conditional Gaussians.
    """
    if k_ring >= n:
        raise ValueError("k_ring must be smaller than n")
    if k_ring % 2 != 0 or k_ring < 2:
        raise ValueError("k_ring must be a positive even count")
    rng = np.random.default_rng(seed)
    present = set()
    for off in range(1, k_ring // 2 + 1):
        for u in range(n):
            v = (u + off) % n
            present.add((min(u, v), max(u, v)))
    edges = sorted(present)
    for idx, (u, v) in enumerate(edges):
        if rng.random() < p_rewire:
            for _ in range(64):  # give up on saturated nodes, keeping the edge
                w = int(rng.integers(n))
                cand = (min(u, w), max(u, w))
                if w != u and cand not in present:
                    present.remove((u, v))
                    present.add(cand)
                    edges[idx] = cand
                    break
    triples = [(u, v, 1.0) for u, v in sorted(present)]
    g = build_graph(n, triples)
    labels = (np.arange(n) * classes) // n
    X = class_features(labels, d, sep, rng)
    return LabeledDataset(X, labels, g)


def gen_heterophily(
    n: int,
    classes: int,
    alpha: float,
    mean_degree: float,
    seed: int = 0,
    d: int = 32,
    sep: float = 1.0,
) -> LabeledDataset:
    """Graph whose cross-class edge fraction is driven to ``alpha``.

    Total edges = round(mean_degree * n / 2); a quota of round(alpha * m)
    edges is sampled uniformly among inter-class pairs, the rest among
    intra-class pairs.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = np.sort(np.arange(n) % classes)
    m = int(round(mean_degree * n / 2.0))
    want_cross = int(round(alpha * m))
    want_intra = m - want_cross

    present = set()

    def sample(count, cross):
        got = 0
        attempts = 0
        while got < count and attempts < 200 * count + 1000:
            attempts += 1
            u = int(rng.integers(n))
            v = int(rng.integers(n))
            if u == v:
                continue
            if (labels[u] != labels[v]) != cross:
                continue
            key = (min(u, v), max(u, v))
            if key in present:
                continue
            present.add(key)
            got += 1
        return got

    sample(want_intra, cross=False)
    sample(want_cross, cross=True)
    triples = [(u, v, 1.0) for u, v in sorted(present)]
    g = build_graph(n, triples)
    X = class_features(labels, d, sep, rng)
    return LabeledDataset(X, labels, g)


def cross_class_fraction(g: Graph, labels: np.ndarray) -> float:
    arr = g.edge_array()
    if arr.shape[0] == 0:
        return 0.0
    lu = labels[arr[:, 0].astype(np.int64)]
    lv = labels[arr[:, 1].astype(np.int64)]
    return float(np.mean(lu != lv))


def gen_geometric(n: int, radius: float, seed: int = 0) -> LabeledDataset:
    """Random geometric graph: points uniform in the unit square, edge iff
    distance <= radius, unit weights. Features are the coordinates, labels
    the quadrant of each point."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    iu, ju = np.triu_indices(n, k=1)
    keep = dist[iu, ju] <= radius
    triples = np.column_stack([iu[keep], ju[keep], np.ones(int(keep.sum()))])
    g = build_graph(n, triples)
    labels = (pts[:, 0] >= 0.5).astype(np.int64) * 2 + (pts[:, 1] >= 0.5).astype(np.int64)
    return LabeledDataset(pts.copy(), labels, g)


def gen_grid(rows: int, cols: int) -> LabeledDataset:
    """4-neighbor lattice; features are normalized coordinates, labels the
    quadrant. Edge count is rows*(cols-1) + cols*(rows-1)."""
    n = rows * cols
    triples = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                triples.append((u, u + 1, 1.0))
            if r + 1 < rows:
                triples.append((u, u + cols, 1.0))
    g = build_graph(n, sorted(triples))
    rr, cc = np.divmod(np.arange(n), cols)
    X = np.column_stack([rr / max(rows - 1, 1), cc / max(cols - 1, 1)]).astype(np.float64)
    labels = (rr >= rows / 2).astype(np.int64) * 2 + (cc >= cols / 2).astype(np.int64)
    return LabeledDataset(X, labels, g)
