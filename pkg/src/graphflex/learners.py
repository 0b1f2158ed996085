"""Structure learners: map node features (or a distance matrix) to a
weighted edge list.

Neighborhood learners (knn/ann) connect nearest feature-space neighbors
with Gaussian kernel weights. The smoothness learners optimize
convex objectives of the form  sum_ij W_ij Z_ij  plus degree and Frobenius
regularizers over symmetric nonnegative zero-diagonal W, parameterized by
the upper-triangle vector w. Covariance learners threshold the node-by-node
empirical (inverse) covariance.

Every learner returns an (m, 3) array of (u, v, w) rows with u < v, weights
positive, lexicographically sorted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coarsening import LshFamily
from .graph import WEIGHT_FLOOR, canonical_edges


class ConvergenceError(RuntimeError):
    """Solver failed to reach its tolerance; carries the final residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SmoothnessConfig:
    """Parameters for the degree-regularized smoothness objectives."""

    alpha: float = 1.0
    beta: float = 0.5
    max_iter: int = 20000
    tol: float = 1e-6
    step: float = 0.0  # 0 = auto via power iteration

    def validate(self):
        if self.alpha <= 0 or self.beta < 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("invalid smoothness config")


@dataclass(frozen=True)
class GlassoConfig:
    rho: float = 0.1
    max_iter: int = 200
    tol: float = 1e-6

    def validate(self):
        if self.rho < 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("invalid glasso config")


# ---------------------------------------------------------------------------
# distances and neighbor search


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance matrix with exact symmetry (each pair is
    computed once and mirrored)."""
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two rows")
    Z = np.zeros((n, n))
    block = max(1, int(4e6) // max(n, 1))
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        diff = X[i0:i1, None, :] - X[None, :, :]
        Z[i0:i1] = np.einsum("ijk,ijk->ij", diff, diff)
    Z = np.triu(Z, k=1)
    return Z + Z.T


def _check_distance_matrix(Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.array_equal(Z, Z.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(Z) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(Z < 0):
        raise ValueError("distances must be nonnegative")
    return Z


def _sq_dists_to(X: np.ndarray, i: int, idx: np.ndarray) -> np.ndarray:
    diff = X[idx] - X[i]
    return np.einsum("ij,ij->i", diff, diff)


def _select_k(d2: np.ndarray, idx: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances; ties at the k-th distance go to
    the smaller node index."""
    order = np.lexsort((idx, d2))
    return idx[order[:k]]


def _knn_pairs(X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact k-nearest-neighbor pairs (us, vs) plus each node's k-th
    distance. Vectorized per block; only rows with distance ties at the
    k-th place take an explicit per-row trim."""
    n = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    us, vs = [], []
    kth = np.empty(n)
    block = max(1, int(4e6) // max(n, 1))
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        D = sq[i0:i1, None] + sq[None, :] - 2.0 * (X[i0:i1] @ X.T)
        np.maximum(D, 0.0, out=D)
        D[np.arange(i1 - i0), np.arange(i0, i1)] = np.inf
        bound = np.partition(D, k - 1, axis=1)[:, k - 1]
        kth[i0:i1] = np.sqrt(bound)
        mask = D <= bound[:, None]
        counts = mask.sum(axis=1)
        rows, cols = np.nonzero(mask)  # row-major: per-row cols ascending
        ties = np.flatnonzero(counts > k)
        if ties.size:  # trim boundary ties toward smaller indices
            offsets = np.r_[np.int64(0), np.cumsum(counts)]
            keep = np.ones(cols.shape[0], dtype=bool)
            for r in ties:
                lo, hi = offsets[r], offsets[r + 1]
                sel = _select_k(D[r, cols[lo:hi]], cols[lo:hi], k)
                keep[lo:hi] = np.isin(cols[lo:hi], sel)
            rows, cols = rows[keep], cols[keep]
        us.append(rows + i0)
        vs.append(cols)
    return np.concatenate(us), np.concatenate(vs), kth


def _kernel_edges(X, us, vs, kth, kernel_sigma) -> np.ndarray:
    n = X.shape[0]
    if kernel_sigma is None:
        sigma = float(np.mean(kth))
        sigma = max(sigma, 1e-300)
    else:
        sigma = float(kernel_sigma)
        if not sigma > 0:
            raise ValueError("kernel_sigma must be positive")
    diff = X[us] - X[vs]
    d2 = np.einsum("ij,ij->i", diff, diff)
    w = np.exp(-d2 / (sigma * sigma)) if np.isfinite(sigma) else np.ones_like(d2)
    # floor keeps every selected edge representable after the dust cutoff
    return canonical_edges(us, vs, np.maximum(w, WEIGHT_FLOOR), n=n)


def learn_knn(X: np.ndarray, k: int, kernel_sigma: float | None = None) -> np.ndarray:
    """k-nearest-neighbor graph, symmetrized by union.

    Weights are exp(-||xi-xj||^2 / sigma^2); sigma defaults to the mean
    k-th-neighbor distance. Pass ``math.inf`` for unit weights.
    """
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n (got k={k}, n={n})")
    us, vs, kth = _knn_pairs(X, k)
    return _kernel_edges(X, us, vs, kth, kernel_sigma)


def _hash_buckets(fam: LshFamily, X: np.ndarray) -> np.ndarray:
    if X.shape[1] != fam.d:
        raise ValueError("feature dim does not match hash family")
    return np.floor((X @ fam.W.T + fam.b) / fam.r_bin).astype(np.int64)


def _ann_pairs(X, k, fam) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Approximate-nearest-neighbor pairs via the h single-hash bucketings.

    Within every bucket each member keeps its k nearest bucket mates;
    buckets of equal size are batched into one tensor pass, and the
    per-node winners across buckets come from one grouped selection.
    Nodes whose buckets yield fewer than k distinct candidates fall back
    to exact search.
    """
    n = X.shape[0]
    B = _hash_buckets(fam, X)
    sq_all = np.einsum("ij,ij->i", X, X)
    groups_by_size: dict[int, list[np.ndarray]] = {}
    for j in range(fam.h):
        col = B[:, j]
        order = np.argsort(col, kind="stable")
        vals = col[order]
        starts = np.flatnonzero(np.r_[True, vals[1:] != vals[:-1]])
        ends = np.r_[starts[1:], col.shape[0]]
        for s, e in zip(starts, ends):
            if e - s >= 2:
                groups_by_size.setdefault(int(e - s), []).append(order[s:e])
    ci, cj, cd = [], [], []
    for m_b, groups in groups_by_size.items():
        kk = min(k, m_b - 1)
        max_rows = max(1, int(2e7) // (m_b * m_b))
        for lo in range(0, len(groups), max_rows):
            A = np.stack(groups[lo : lo + max_rows])  # (batch, m_b) node ids
            G = X[A]
            sq = sq_all[A]
            D = sq[:, :, None] + sq[:, None, :] - 2.0 * np.einsum("bid,bjd->bij", G, G)
            rows = np.arange(m_b)
            D[:, rows, rows] = np.inf
            idx = np.argpartition(D, kk - 1, axis=2)[:, :, :kk]
            ci.append(np.repeat(A.ravel(), kk))
            cj.append(A[np.arange(A.shape[0])[:, None, None], idx].ravel())
            cd.append(np.maximum(np.take_along_axis(D, idx, axis=2).ravel(), 0.0))
    kth = np.empty(n)
    counts = np.zeros(n, dtype=np.int64)
    us = vs = np.empty(0, dtype=np.int64)
    if ci:
        i_arr = np.concatenate(ci)
        j_arr = np.concatenate(cj)
        d_arr = np.concatenate(cd)
        key = i_arr * np.int64(n) + j_arr  # drop duplicate pairs found by several hashes
        _, first = np.unique(key, return_index=True)
        i_arr, j_arr, d_arr = i_arr[first], j_arr[first], d_arr[first]
        order = np.lexsort((j_arr, d_arr, i_arr))
        i_arr, j_arr, d_arr = i_arr[order], j_arr[order], d_arr[order]
        counts = np.bincount(i_arr, minlength=n)
        offsets = np.r_[np.int64(0), np.cumsum(counts)]
        good = np.flatnonzero(counts >= k)
        take = offsets[good][:, None] + np.arange(k)[None, :]
        us = np.repeat(good, k)
        vs = j_arr[take].ravel()
        kth[good] = np.sqrt(d_arr[offsets[good] + k - 1])
    loners = np.flatnonzero(counts < k)
    if loners.size:  # sparse buckets: exact fallback
        all_idx = np.arange(n)
        eus, evs = [], []
        for i in loners:
            idx = np.delete(all_idx, i)
            d2 = _sq_dists_to(X, i, idx)
            sel = _select_k(d2, idx, k)
            eus.append(np.full(sel.shape[0], i, dtype=np.int64))
            evs.append(sel)
            kth[i] = math.sqrt(float(np.max(_sq_dists_to(X, i, sel))))
        us = np.concatenate([us] + eus)
        vs = np.concatenate([vs] + evs)
    return us, vs, kth


def learn_ann(X: np.ndarray, k: int, fam: LshFamily, kernel_sigma: float | None = None) -> np.ndarray:
    """Approximate kNN: neighbor search restricted to LSH bucket mates,
    with exact fallback for nodes whose buckets hold fewer than k mates."""
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n (got k={k}, n={n})")
    us, vs, kth = _ann_pairs(X, k, fam)
    return _kernel_edges(X, us, vs, kth, kernel_sigma)


# ---------------------------------------------------------------------------
# covariance learners


def _node_covariance(X: np.ndarray) -> np.ndarray:
    if X.shape[1] < 2:
        raise ValueError("need at least two feature columns")
    Xc = X - X.mean(axis=1, keepdims=True)
    return (Xc @ Xc.T) / (X.shape[1] - 1)


def learn_cov(X: np.ndarray, density: float) -> np.ndarray:
    """Thresholded empirical covariance: keep the ceil(density * n(n-1)/2)
    largest |cov(i, j)| pairs as edges weighted by |cov|."""
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    S = _node_covariance(X)
    n = S.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    mag = np.abs(S[iu, ju])
    count = math.ceil(density * n * (n - 1) / 2)
    order = np.lexsort((ju, iu, -mag))[:count]
    return canonical_edges(iu[order], ju[order], mag[order], n=n)


# ---------------------------------------------------------------------------
# smoothness solvers on upper-triangle variables


def _pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, k=1)
    return iu.astype(np.int64), ju.astype(np.int64)


def _deg(w, I, J, n):
    return np.bincount(I, weights=w, minlength=n) + np.bincount(J, weights=w, minlength=n)


def _lift(y, I, J):
    return y[I] + y[J]


def _lambda_max(n: int, I: np.ndarray, J: np.ndarray, iters: int = 60) -> float:
    """Largest eigenvalue of the pair-to-degree operator's Gram matrix."""
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(I.shape[0])
    lam = 1.0
    for _ in range(iters):
        v = _lift(_deg(v, I, J, n), I, J)
        lam = float(np.linalg.norm(v))
        if lam == 0:
            return 1.0
        v /= lam
    return lam


def _project_scaled_simplex(v: np.ndarray, total: float) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, u.shape[0] + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _l2_objective(w, z, I, J, n, alpha):
    d = _deg(w, I, J, n)
    return 2.0 * float(z @ w) + alpha * float(d @ d) + 2.0 * alpha * float(w @ w)


def _solve_l2(Z: np.ndarray, cfg: SmoothnessConfig):
    """Projected gradient for the total-weight-constrained objective.

    Returns (w, I, J, objective history)."""
    cfg.validate()
    Z = _check_distance_matrix(Z)
    n = Z.shape[0]
    I, J = _pair_arrays(n)
    z = Z[I, J]
    alpha = cfg.alpha
    total = n / 2.0
    if cfg.step > 0:
        step = cfg.step
    else:
        step = 1.0 / (2.0 * alpha * _lambda_max(n, I, J) + 4.0 * alpha)
    w = np.full(I.shape[0], total / I.shape[0])
    history = [_l2_objective(w, z, I, J, n, alpha)]
    for _ in range(cfg.max_iter):
        d = _deg(w, I, J, n)
        grad = 2.0 * z + 2.0 * alpha * _lift(d, I, J) + 4.0 * alpha * w
        w_new = _project_scaled_simplex(w - step * grad, total)
        residual = float(np.linalg.norm(w_new - w)) / step
        w = w_new
        history.append(_l2_objective(w, z, I, J, n, alpha))
        if residual < cfg.tol:
            return w, I, J, history
    raise ConvergenceError("l2 learner did not converge", residual)


def learn_l2(Z: np.ndarray, cfg: SmoothnessConfig) -> np.ndarray:
    """Smoothness learner with total weight pinned: upper-triangle weights
    sum to n/2 over the scaled simplex."""
    w, I, J, _ = _solve_l2(Z, cfg)
    keep = w > 1e-8
    return canonical_edges(I[keep], J[keep], w[keep])


def _log_objective(w, z, I, J, n, alpha, beta):
    d = _deg(w, I, J, n)
    if np.any(d <= 0):
        return math.inf
    return 2.0 * float(z @ w) - alpha * float(np.log(d).sum()) + beta * float(w @ w)


def _log_kkt_residual(w, z, I, J, n, alpha, beta):
    d = _deg(w, I, J, n)
    if np.any(d <= 0):
        return math.inf
    g = 2.0 * z + 2.0 * beta * w - alpha * _lift(1.0 / d, I, J)
    active = w > 1e-10
    res = 0.0
    if np.any(active):
        res = float(np.abs(g[active]).max())
    if np.any(~active):
        res = max(res, float(np.maximum(-g[~active], 0.0).max()))
    return res


def _solve_log_support(z, I, J, n, cfg: SmoothnessConfig):
    """Primal-dual splitting for the log-barrier degree objective over an
    explicit support of (I, J) pairs. Returns (w, history, residual)."""
    cfg.validate()
    incident = np.bincount(I, minlength=n) + np.bincount(J, minlength=n)
    if np.any(incident == 0):
        raise ValueError("infeasible support: a node has no candidate pair (log barrier)")
    alpha, beta = cfg.alpha, cfg.beta
    lam = _lambda_max(n, I, J)
    if cfg.step > 0:
        tau = sigma = cfg.step
    else:
        tau = sigma = 0.95 * (-beta + math.sqrt(beta * beta + 4.0 * lam)) / (2.0 * lam)
    scale = float(np.mean(z)) + 1.0
    w = np.full(I.shape[0], alpha / (n * scale) + 1e-12)
    u = -alpha / _deg(w, I, J, n)
    history = [_log_objective(w, z, I, J, n, alpha, beta)]
    residual = math.inf
    for it in range(cfg.max_iter):
        grad = 2.0 * z + 2.0 * beta * w + _lift(u, I, J)
        w_next = np.maximum(w - tau * grad, 0.0)
        v = u + sigma * _deg(2.0 * w_next - w, I, J, n)
        u = 0.5 * (v - np.sqrt(v * v + 4.0 * alpha * sigma))
        w = w_next
        if (it + 1) % 10 == 0 or it + 1 == cfg.max_iter:
            history.append(_log_objective(w, z, I, J, n, alpha, beta))
            residual = _log_kkt_residual(w, z, I, J, n, alpha, beta)
            if residual < cfg.tol:
                return w, history, residual
    raise ConvergenceError("log learner did not converge", residual)


def _solve_log(Z: np.ndarray, cfg: SmoothnessConfig):
    Z = _check_distance_matrix(Z)
    n = Z.shape[0]
    I, J = _pair_arrays(n)
    w, history, residual = _solve_log_support(Z[I, J], I, J, n, cfg)
    return w, I, J, history, residual


def learn_log(Z: np.ndarray, cfg: SmoothnessConfig) -> np.ndarray:
    """Log-barrier smoothness learner; every node ends with strictly
    positive degree."""
    w, I, J, _, _ = _solve_log(Z, cfg)
    keep = w > 1e-8
    return canonical_edges(I[keep], J[keep], w[keep])


def ann_support_pairs(X: np.ndarray, k_cand: int, fam: LshFamily) -> tuple[np.ndarray, np.ndarray]:
    """Union of approximate-nearest-neighbor pairs (k_cand per node)."""
    us, vs, _ = _ann_pairs(X, k_cand, fam)
    lo, hi = np.minimum(us, vs), np.maximum(us, vs)
    key = np.unique(lo * np.int64(X.shape[0]) + hi)
    return (key // X.shape[0]).astype(np.int64), (key % X.shape[0]).astype(np.int64)


def learn_large(X: np.ndarray, k_cand: int, cfg: SmoothnessConfig, fam: LshFamily) -> np.ndarray:
    """Log-barrier learner restricted to approximate-neighbor support;
    pairs outside the support are structurally zero."""
    n = X.shape[0]
    if not 1 <= k_cand < n:
        raise ValueError(f"k_cand must satisfy 1 <= k_cand < n (got {k_cand}, n={n})")
    Z = pairwise_distances(X)
    I, J = ann_support_pairs(X, k_cand, fam)
    w, _, _ = _solve_log_support(Z[I, J], I, J, n, cfg)
    keep = w > 1e-8
    return canonical_edges(I[keep], J[keep], w[keep])


# ---------------------------------------------------------------------------
# graphical lasso

_GLASSO_RIDGE = 1e-3
_GLASSO_MAX_N = 2000


def _soft(x, t):
    return math.copysign(max(abs(x) - t, 0.0), x)


def _lasso_cd(V: np.ndarray, s: np.ndarray, rho: float, beta: np.ndarray, max_iter=1000, tol=1e-12):
    """Coordinate descent for 0.5 b'Vb - s'b + rho |b|_1 (V positive definite)."""
    p = V.shape[0]
    for _ in range(max_iter):
        delta = 0.0
        for j in range(p):
            r = s[j] - V[j] @ beta + V[j, j] * beta[j]
            new = _soft(r, rho) / V[j, j]
            delta = max(delta, abs(new - beta[j]))
            beta[j] = new
        if delta < tol:
            break
    return beta


def _graphical_lasso(S: np.ndarray, rho: float, max_iter: int, tol: float):
    """Block coordinate descent; returns (precision, duality gap)."""
    p = S.shape[0]
    W = S.copy()
    W[np.diag_indices(p)] += rho
    betas = np.zeros((p, p - 1))
    Theta = np.linalg.inv(W)
    gap = math.inf
    for _ in range(max_iter):
        for j in range(p):
            idx = np.r_[0:j, j + 1 : p]
            V = W[np.ix_(idx, idx)]
            betas[j] = _lasso_cd(V, S[idx, j], rho, betas[j])
            w12 = V @ betas[j]
            W[idx, j] = w12
            W[j, idx] = w12
        for j in range(p):
            idx = np.r_[0:j, j + 1 : p]
            denom = W[j, j] - W[idx, j] @ betas[j]
            Theta[j, j] = 1.0 / denom
            Theta[idx, j] = -betas[j] / denom
            Theta[j, idx] = Theta[idx, j]
        gap = abs(float(np.sum(S * Theta)) - p + rho * float(np.abs(Theta).sum()))
        if gap < tol:
            return Theta, gap
    raise ConvergenceError("graphical lasso did not converge", gap)


def learn_glasso(X: np.ndarray, cfg: GlassoConfig) -> np.ndarray:
    """Sparse inverse covariance on the ridge-stabilized node covariance;
    off-diagonal entries above 1e-6 in magnitude become edges."""
    cfg.validate()
    n = X.shape[0]
    if n > _GLASSO_MAX_N:
        raise ValueError(f"glasso learner is guarded to n <= {_GLASSO_MAX_N} (got {n})")
    S = _node_covariance(X)
    S[np.diag_indices(n)] += _GLASSO_RIDGE
    Theta, _ = _graphical_lasso(S, cfg.rho, cfg.max_iter, cfg.tol)
    iu, ju = np.triu_indices(n, k=1)
    mag = np.abs(Theta[iu, ju])
    keep = mag > 1e-6
    return canonical_edges(iu[keep], ju[keep], mag[keep], n=n)
