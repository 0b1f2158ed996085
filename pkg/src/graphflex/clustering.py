"""Community detection trained once on the static graph, then applied to
every incoming node by nearest-centroid inference in raw feature space.

Two trainers: Lloyd k-means with k-means++ seeding, and spectral
clustering on the symmetric normalized Laplacian (dense solver up to 2048
nodes, Lanczos above). Both produce a ClusterModel whose centroids are
per-community means of the raw features, so inference never needs the
graph again.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .graph import Graph
from .learners import ConvergenceError

_DENSE_EIG_LIMIT = 2048
_LANCZOS_MAX_ITER = 500
_LANCZOS_TOL = 1e-8


@dataclass
class ClusterModel:
    method: str  # "kmeans" | "spectral"
    k: int
    centroids: np.ndarray  # (k, d) in raw feature space
    train_assignments: np.ndarray | None
    repair_count: int = 0  # empty-cluster reseeds during training


@dataclass
class ConsistencyReport:
    n: int
    lam: float  # realized average degree
    misclassified_fraction: float


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[c] = X[rng.integers(n)]
            continue
        centroids[c] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((X - centroids[c]) ** 2).sum(1))
    return centroids


def _assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
    return np.argmin(d2, axis=1)


def _sse(X, centroids, assign) -> float:
    return float(((X - centroids[assign]) ** 2).sum())


def kmeans_fit(X: np.ndarray, k: int, max_iter: int = 100, seed: int = 0) -> ClusterModel:
    """Lloyd iterations from a k-means++ start.

    The objective never increases; empty clusters are repaired by reseeding
    to the farthest point (counted in ``repair_count``). Stops when the
    relative objective change drops below 1e-7 or at max_iter.
    """
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n (got k={k}, n={n})")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng)
    repairs = 0
    prev = np.inf
    assign = _assign(X, centroids)
    for _ in range(max_iter):
        for c in range(k):
            members = assign == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
        assign = _assign(X, centroids)
        assign, extra = _repair_empty(X, centroids, assign)
        repairs += extra
        obj = _sse(X, centroids, assign)
        assert obj <= prev + 1e-9 * max(prev, 1.0), "k-means objective increased"
        if prev < np.inf and prev - obj <= 1e-7 * max(prev, 1e-300):
            break
        prev = obj
    # pin stored centroids to the exact means of the final assignment
    for c in range(k):
        members = assign == c
        if members.any():
            centroids[c] = X[members].mean(axis=0)
    return ClusterModel("kmeans", k, centroids, assign, repairs)


def _repair_empty(X, centroids, assign):
    """Reseed empty clusters to the current farthest point, one at a time."""
    k = centroids.shape[0]
    repairs = 0
    for _ in range(2 * k):
        counts = np.bincount(assign, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            break
        far = int(np.argmax(((X - centroids[assign]) ** 2).sum(1)))
        centroids[empties[0]] = X[far]
        repairs += 1
        assign = _assign(X, centroids)
    return assign, repairs


def _normalized_laplacian(g: Graph) -> sp.csr_matrix:
    deg = g.degrees()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    rows = g._rows()
    vals = -inv_sqrt[rows] * g.weights * inv_sqrt[g.col_indices]
    A = sp.csr_matrix((vals, g.col_indices, g.row_offsets), shape=(g.n, g.n))
    return (A + sp.eye(g.n, format="csr")).tocsr()


def _smallest_eigvecs(L: sp.csr_matrix, k: int, seed: int) -> np.ndarray:
    n = L.shape[0]
    if n <= _DENSE_EIG_LIMIT:
        _, vecs = scipy.linalg.eigh(L.toarray(), subset_by_index=(0, k - 1))
        return vecs
    # Lanczos on the spectrum flip: largest of 2I - L_sym are smallest of L_sym
    flipped = sp.eye(n, format="csr") * 2.0 - L
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        vals, vecs = eigsh(
            flipped, k=k, which="LA", maxiter=_LANCZOS_MAX_ITER, tol=_LANCZOS_TOL, v0=v0
        )
    except ArpackNoConvergence as e:
        if len(e.eigenvalues):
            resids = np.linalg.norm(
                flipped @ e.eigenvectors - e.eigenvectors * e.eigenvalues, axis=0
            )
            residual = float(resids.max())
        else:
            residual = float("inf")
        raise ConvergenceError("eigensolver did not converge", residual) from e
    order = np.argsort(-vals)
    return vecs[:, order]


def spectral_fit(g: Graph, X: np.ndarray, k: int, seed: int = 0) -> ClusterModel:
    """Spectral clustering: k smallest eigenvectors of the symmetric
    normalized Laplacian, row-normalized, clustered by k-means. Centroids
    are recomputed in raw feature space for out-of-sample inference."""
    if g.n != X.shape[0]:
        raise ValueError("graph and feature row counts differ")
    if not 1 <= k <= g.n:
        raise ValueError(f"k must satisfy 1 <= k <= n (got k={k}, n={g.n})")
    L = _normalized_laplacian(g)
    emb = _smallest_eigvecs(L, k, seed)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = np.where(norms > 0, emb / np.maximum(norms, 1e-300), emb)
    inner = kmeans_fit(emb, k, max_iter=200, seed=seed)
    assign = inner.train_assignments
    centroids = np.zeros((k, X.shape[1]))
    for c in range(k):
        members = assign == c
        if members.any():
            centroids[c] = X[members].mean(axis=0)
        else:  # empty communities are repaired inside kmeans; guard anyway
            centroids[c] = X.mean(axis=0)
    return ClusterModel("spectral", k, centroids, assign, inner.repair_count)


def infer_community(m: ClusterModel, x: np.ndarray) -> int:
    """Nearest centroid in raw feature space; ties go to the smallest id."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.centroids.shape[1],):
        raise ValueError(f"feature dim {x.shape} does not match model dim {m.centroids.shape[1]}")
    d2 = ((m.centroids - x) ** 2).sum(1)
    return int(np.argmin(d2))


def infer_many(m: ClusterModel, X: np.ndarray) -> np.ndarray:
    if X.shape[1] != m.centroids.shape[1]:
        raise ValueError("feature dim does not match model dim")
    return _assign(X, m.centroids)


def misclassified_fraction(true_labels, pred_labels) -> float:
    """Fraction of nodes misassigned under the best label permutation
    (optimal assignment on the confusion matrix)."""
    a = np.asarray(true_labels, dtype=np.int64)
    b = np.asarray(pred_labels, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("label arrays must have equal length")
    k = int(max(a.max(), b.max())) + 1
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (a, b), 1)
    rows, cols = linear_sum_assignment(-conf)
    return 1.0 - conf[rows, cols].sum() / a.shape[0]


def consistency_experiment(grid) -> list[ConsistencyReport]:
    """Fit spectral clustering on a grid of block-model draws and report
    the misclassification fraction of each; callers assert the decreasing
    trend across growing sizes."""
    from .synth import gen_dcsbm

    reports = []
    for params in grid:
        ds = gen_dcsbm(params)
        model = spectral_fit(ds.graph, ds.features, params.k, seed=params.seed)
        frac = misclassified_fraction(ds.labels, model.train_assignments)
        lam = float(ds.graph.degree_counts().mean())
        reports.append(ConsistencyReport(n=params.n, lam=lam, misclassified_fraction=frac))
    return reports


# --- model serialization ---------------------------------------------------

_MCLU_MAGIC = b"MCLU"
_MCLU_VERSION = 1
_METHOD_TAGS = {"kmeans": 0, "spectral": 1}


def save_model(path, m: ClusterModel) -> None:
    with open(path, "wb") as f:
        f.write(_MCLU_MAGIC)
        f.write(struct.pack("<I", _MCLU_VERSION))
        f.write(struct.pack("<I", _METHOD_TAGS[m.method]))
        f.write(struct.pack("<QQ", m.k, m.centroids.shape[1]))
        f.write(np.ascontiguousarray(m.centroids, dtype=np.float64).tobytes())


def load_model(path) -> ClusterModel:
    """Load a serialized model; train-time assignments are not stored, so
    the result supports inference only."""
    with open(path, "rb") as f:
        if f.read(4) != _MCLU_MAGIC:
            raise ValueError(f"{path}: not a cluster model file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _MCLU_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        (tag,) = struct.unpack("<I", f.read(4))
        k, d = struct.unpack("<QQ", f.read(16))
        payload = f.read(8 * k * d)
        if len(payload) != 8 * k * d:
            raise ValueError(f"{path}: truncated centroid payload")
        centroids = np.frombuffer(payload, dtype="<f8").reshape(k, d).copy()
    method = {v: k_ for k_, v in _METHOD_TAGS.items()}[tag]
    return ClusterModel(method, int(k), centroids, None)
