"""End-to-end incremental structure learning.

The data is split into a static prefix and T arrival batches. A community
model is trained once on the static graph; each batch is then routed
through community inference, per-community coarsening, a coarse learning
pass that picks connected supernodes, and a final learning pass restricted
to the expanded candidate sets. Only edges touching incoming nodes are
merged, so the graph grows monotonically.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .clustering import ClusterModel, infer_many, kmeans_fit, spectral_fit
from .coarsening import (
    LshFamily,
    auto_bin_width,
    candidate_set,
    coarsen,
    collision_bound,
    identity_coarsening,
)
from .graph import Graph, build_graph, canonical_edges, induced_subgraph, merge_edges
from .learners import (
    GlassoConfig,
    SmoothnessConfig,
    learn_ann,
    learn_cov,
    learn_glasso,
    learn_knn,
    learn_l2,
    learn_large,
    learn_log,
    pairwise_distances,
)

LEARNER_METHODS = ("knn", "ann", "cov", "l2", "log", "large", "glasso")


@dataclass(frozen=True)
class LearnerSpec:
    """One structure learner selection plus its hyperparameters."""

    method: str = "knn"
    k: int = 5  # neighbors (knn/ann) or support size per node (large)
    sigma: float = 0.0  # kernel width, 0 = auto
    density: float = 0.05  # cov
    alpha: float = 1.0  # smoothness
    beta: float = 0.5
    rho: float = 0.1  # glasso
    max_iter: int = 20000
    tol: float = 1e-6
    h: int = 8  # ann hash count
    r_bin: float = 0.0  # ann bin width, 0 = auto

    def validate(self):
        if self.method not in LEARNER_METHODS:
            raise ValueError(f"unknown learner method {self.method!r}")
        if self.k < 1:
            raise ValueError("learner k must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    clust_method: str = "kmeans"  # kmeans | spectral
    clust_k: int = 8
    coar_h: int = 5
    coar_r_bin: float = 0.0  # 0 = data-driven default per community
    learner_coarse: LearnerSpec = field(default_factory=lambda: LearnerSpec("knn", k=15))
    learner_final: LearnerSpec = field(default_factory=lambda: LearnerSpec("knn", k=5))
    knn_k: int = 5
    r_split: float = 0.5
    T: int = 25
    seed: int = 0
    vanilla: bool = False  # bypass clustering/coarsening, learn on the full set

    def validate(self):
        if self.clust_method not in ("kmeans", "spectral"):
            raise ValueError(f"unknown clustering method {self.clust_method!r}")
        if not 0.0 < self.r_split <= 1.0:
            raise ValueError("r_split must lie in (0, 1]")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.clust_k < 1 or self.knn_k < 1 or self.coar_h < 1:
            raise ValueError("counts must be positive")
        self.learner_coarse.validate()
        self.learner_final.validate()


_CONFIG_SCALARS = {
    "clust_method": str,
    "clust_k": int,
    "coar_h": int,
    "coar_r_bin": float,
    "knn_k": int,
    "r_split": float,
    "T": int,
    "seed": int,
    "vanilla": bool,
}
_LEARNER_FIELDS = {
    "k": int,
    "sigma": float,
    "density": float,
    "alpha": float,
    "beta": float,
    "rho": float,
    "max_iter": int,
    "tol": float,
    "h": int,
    "r_bin": float,
}


def config_from_dict(doc: dict) -> PipelineConfig:
    """Build a config from the flat key-value JSON schema; unknown keys are
    rejected."""
    kwargs = {}
    coarse = {}
    final = {}
    for key, value in doc.items():
        if key in _CONFIG_SCALARS:
            kwargs[key] = _CONFIG_SCALARS[key](value)
        elif key == "learner_coarse":
            coarse["method"] = str(value)
        elif key == "learner_final":
            final["method"] = str(value)
        elif key.startswith("coarse_") and key[7:] in _LEARNER_FIELDS:
            coarse[key[7:]] = _LEARNER_FIELDS[key[7:]](value)
        elif key.startswith("final_") and key[6:] in _LEARNER_FIELDS:
            final[key[6:]] = _LEARNER_FIELDS[key[6:]](value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    cfg = PipelineConfig(
        **kwargs,
        learner_coarse=LearnerSpec(**{"method": "knn", "k": 15, **coarse}),
        learner_final=LearnerSpec(**{"method": "knn", "k": 5, **final}),
    )
    cfg.validate()
    return cfg


def config_from_json(path) -> PipelineConfig:
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return config_from_dict(doc)


def _child_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) & 0x7FFFFFFF for p in parts]).generate_state(1)[0])


def run_learner(spec: LearnerSpec, X: np.ndarray, seed: int = 0) -> np.ndarray:
    """Dispatch a learner selection on a feature block; k-style parameters
    are clamped to the block size."""
    spec.validate()
    n = X.shape[0]
    if n < 2:
        return np.empty((0, 3))
    sigma = spec.sigma if spec.sigma > 0 else None
    if spec.method == "knn":
        return learn_knn(X, min(spec.k, n - 1), sigma)
    if spec.method == "ann":
        fam = _ann_family(spec, X, seed)
        return learn_ann(X, min(spec.k, n - 1), fam, sigma)
    if spec.method == "cov":
        return learn_cov(X, spec.density)
    if spec.method == "glasso":
        return learn_glasso(X, GlassoConfig(rho=spec.rho, max_iter=spec.max_iter, tol=spec.tol))
    cfg = SmoothnessConfig(alpha=spec.alpha, beta=spec.beta, max_iter=spec.max_iter, tol=spec.tol)
    if spec.method == "l2":
        return learn_l2(pairwise_distances(X), cfg)
    if spec.method == "log":
        return learn_log(pairwise_distances(X), cfg)
    fam = _ann_family(spec, X, seed)
    return learn_large(X, min(spec.k, n - 1), cfg, fam)


def _ann_family(spec: LearnerSpec, X: np.ndarray, seed: int) -> LshFamily:
    r_bin = spec.r_bin if spec.r_bin > 0 else auto_bin_width(X, seed=seed)
    return LshFamily.generate(d=X.shape[1], h=spec.h, r_bin=r_bin, seed=seed)


# ---------------------------------------------------------------------------
# expanding protocol


def split_expanding(X: np.ndarray, r_split: float, T: int, seed: int):
    """Uniform random split into floor(r*n) static indices and T arrival
    batches whose sizes differ by at most one."""
    if not 0.0 < r_split <= 1.0:
        raise ValueError("r_split must lie in (0, 1]")
    if T < 1:
        raise ValueError("T must be at least 1")
    n = X.shape[0]
    n0 = int(np.floor(r_split * n))
    if n0 == 0:
        raise ValueError("static set is empty; increase r_split")
    perm = np.random.default_rng(seed).permutation(n)
    static = perm[:n0]
    rest = perm[n0:]
    return static, _even_batches(rest, T)


def _even_batches(rest: np.ndarray, T: int) -> list[np.ndarray]:
    m = rest.shape[0]
    base, extra = divmod(m, T)
    batches, pos = [], 0
    for t in range(T):
        size = base + (1 if t < extra else 0)
        batches.append(rest[pos : pos + size])
        pos += size
    return batches


@dataclass
class StepRecord:
    step: int
    incoming: int
    total_nodes: int
    omega_mean: float
    omega_max: int
    final_nodes: int  # nodes handed to the final learner this step
    clust_ms: float
    coar_ms: float
    learn_ms: float
    total_ms: float


@dataclass
class PipelineState:
    graph: Graph
    features: np.ndarray
    model: ClusterModel
    labels: np.ndarray  # community of every arrived node, frozen at arrival
    cfg: PipelineConfig
    log: list[StepRecord] = field(default_factory=list)

    @property
    def arrived(self) -> int:
        return self.graph.n


@dataclass
class RunReport:
    order: np.ndarray  # original row index of every pipeline node id
    steps: list[StepRecord]
    clust_ms: float
    coar_ms: float
    learn_ms: float
    total_ms: float


def init(
    X0: np.ndarray, g0: Graph | None, cfg: PipelineConfig, model: ClusterModel | None = None
) -> PipelineState:
    """Train the community model on the static graph; when no graph is
    given, learn it from scratch with the final learner. A pre-trained
    model may be supplied instead of training (static nodes are then
    labeled by inference)."""
    cfg.validate()
    if g0 is not None and g0.n != X0.shape[0]:
        raise ValueError("initial graph and features disagree on node count")
    t0 = time.perf_counter()
    if g0 is None:
        edges = run_learner(cfg.learner_final, X0, seed=_child_seed(cfg.seed, 0, 0))
        g0 = build_graph(X0.shape[0], edges)
    learn_ms = (time.perf_counter() - t0) * 1e3
    t1 = time.perf_counter()
    k = min(cfg.clust_k, X0.shape[0])
    if model is not None:
        labels = infer_many(model, X0)
    elif cfg.vanilla:
        model = ClusterModel("kmeans", 1, X0.mean(axis=0, keepdims=True), np.zeros(X0.shape[0], dtype=np.int64))
        labels = model.train_assignments
    elif cfg.clust_method == "kmeans":
        model = kmeans_fit(X0, k, seed=cfg.seed)
        labels = model.train_assignments
    else:
        model = spectral_fit(g0, X0, k, seed=cfg.seed)
        labels = model.train_assignments
    clust_ms = (time.perf_counter() - t1) * 1e3
    state = PipelineState(
        graph=g0,
        features=np.array(X0, dtype=np.float64),
        model=model,
        labels=np.asarray(labels, dtype=np.int64),
        cfg=cfg,
    )
    state.log.append(
        StepRecord(0, X0.shape[0], X0.shape[0], 0.0, 0, X0.shape[0], clust_ms, 0.0, learn_ms, clust_ms + learn_ms)
    )
    return state


def _coarse_connections(
    spec: LearnerSpec, super_feats: np.ndarray, X_inc: np.ndarray, seed: int
) -> list[np.ndarray]:
    """Supernode ids each incoming node connects to in the coarse graph.

    Neighborhood learners take each incoming node's k nearest supernodes;
    the optimization learners run on the stacked supernode + incoming
    features and keep the cross edges.
    """
    s = super_feats.shape[0]
    b = X_inc.shape[0]
    if s == 0 or b == 0:
        return [np.empty(0, dtype=np.int64) for _ in range(b)]
    if spec.method in ("knn", "ann"):
        k = min(spec.k, s)
        d2 = ((X_inc[:, None, :] - super_feats[None, :, :]) ** 2).sum(-1)
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return [np.sort(row) for row in idx]
    stacked = np.vstack([super_feats, X_inc])
    edges = run_learner(spec, stacked, seed)
    conn: list[list[int]] = [[] for _ in range(b)]
    for u, v, _ in edges:
        u, v = int(u), int(v)
        if u < s <= v:
            conn[v - s].append(u)
    return [np.array(sorted(c), dtype=np.int64) for c in conn]


def _global_knn_pool(state: PipelineState, X_inc: np.ndarray, k: int) -> np.ndarray:
    """Fallback candidates when a community has no existing members."""
    existing = state.features
    k = min(k, existing.shape[0])
    d2 = ((X_inc[:, None, :] - existing[None, :, :]) ** 2).sum(-1)
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return np.unique(idx)


def step(state: PipelineState, Xb: np.ndarray) -> PipelineState:
    """Integrate one arrival batch and return the grown state."""
    cfg = state.cfg
    if Xb.shape[0] and Xb.shape[1] != state.features.shape[1]:
        raise ValueError("batch feature dimension mismatch")
    t_start = time.perf_counter()
    step_idx = len(state.log)
    arrived = state.arrived
    b = Xb.shape[0]
    if b == 0:
        new_state = replace(state, log=list(state.log))
        new_state.log.append(
            StepRecord(step_idx, 0, arrived, 0.0, 0, 0, 0.0, 0.0, 0.0, 0.0)
        )
        return new_state

    if cfg.vanilla:
        return _vanilla_step(state, Xb, t_start)

    t0 = time.perf_counter()
    communities = infer_many(state.model, Xb)
    clust_ms = (time.perf_counter() - t0) * 1e3

    coar_ms = 0.0
    learn_ms = 0.0
    omega_sizes: list[int] = []
    final_nodes = 0
    new_edges = []
    for comm in np.unique(communities):
        inc_rows = np.flatnonzero(communities == comm)
        inc_global = arrived + inc_rows
        members = np.flatnonzero(state.labels == comm)
        X_inc = Xb[inc_rows]

        if members.size == 0:
            pool = _global_knn_pool(state, X_inc, cfg.knn_k)
            omega_sizes.extend([int(pool.shape[0])] * inc_rows.shape[0])
        else:
            t1 = time.perf_counter()
            sub, old_ids = induced_subgraph(state.graph, members)
            X_comm = state.features[members]
            r_bin = cfg.coar_r_bin if cfg.coar_r_bin > 0 else auto_bin_width(
                X_comm, seed=_child_seed(cfg.seed, step_idx, comm, 1)
            )
            fam = LshFamily.generate(
                d=X_comm.shape[1], h=cfg.coar_h, r_bin=r_bin,
                seed=_child_seed(cfg.seed, step_idx, comm, 2),
            )
            coar = coarsen(sub, X_comm, fam)
            conn = _coarse_connections(
                cfg.learner_coarse, coar.super_features, X_inc,
                seed=_child_seed(cfg.seed, step_idx, comm, 3),
            )
            omega = candidate_set(coar, dict(enumerate(conn)))
            coar_ms += (time.perf_counter() - t1) * 1e3

            local_sets = []
            for i in range(inc_rows.shape[0]):
                w = omega[i]
                if w.shape[0] == 0:
                    w = np.arange(members.shape[0])  # fallback: whole community
                omega_sizes.append(int(w.shape[0]))
                local_sets.append(w)
            pool = old_ids[np.unique(np.concatenate(local_sets))]

        t2 = time.perf_counter()
        node_feats = np.vstack([state.features[pool], X_inc])
        final_nodes += node_feats.shape[0]
        edges = run_learner(
            cfg.learner_final, node_feats, seed=_child_seed(cfg.seed, step_idx, comm, 4)
        )
        learn_ms += (time.perf_counter() - t2) * 1e3
        p = pool.shape[0]
        if edges.shape[0]:
            touch_incoming = (edges[:, 0] >= p) | (edges[:, 1] >= p)
            edges = edges[touch_incoming]
            local_to_global = np.concatenate([pool, inc_global])
            new_edges.append(
                np.column_stack(
                    [
                        local_to_global[edges[:, 0].astype(np.int64)],
                        local_to_global[edges[:, 1].astype(np.int64)],
                        edges[:, 2],
                    ]
                )
            )

    merged_edges = (
        canonical_edges(
            np.concatenate([e[:, 0] for e in new_edges]),
            np.concatenate([e[:, 1] for e in new_edges]),
            np.concatenate([e[:, 2] for e in new_edges]),
            n=arrived + b,
        )
        if new_edges
        else np.empty((0, 3))
    )
    graph = merge_edges(state.graph, merged_edges, arrived + b)
    total_ms = (time.perf_counter() - t_start) * 1e3
    record = StepRecord(
        step=step_idx,
        incoming=b,
        total_nodes=arrived + b,
        omega_mean=float(np.mean(omega_sizes)) if omega_sizes else 0.0,
        omega_max=int(np.max(omega_sizes)) if omega_sizes else 0,
        final_nodes=final_nodes,
        clust_ms=clust_ms,
        coar_ms=coar_ms,
        learn_ms=learn_ms,
        total_ms=total_ms,
    )
    new_state = PipelineState(
        graph=graph,
        features=np.vstack([state.features, Xb]),
        model=state.model,
        labels=np.concatenate([state.labels, communities]),
        cfg=cfg,
        log=list(state.log) + [record],
    )
    return new_state


def _vanilla_step(state: PipelineState, Xb: np.ndarray, t_start: float) -> PipelineState:
    """Baseline: final learner over all arrived nodes, no restriction."""
    cfg = state.cfg
    arrived = state.arrived
    b = Xb.shape[0]
    feats = np.vstack([state.features, Xb])
    t0 = time.perf_counter()
    edges = run_learner(cfg.learner_final, feats, seed=_child_seed(cfg.seed, len(state.log), 0, 4))
    learn_ms = (time.perf_counter() - t0) * 1e3
    if edges.shape[0]:
        touch = (edges[:, 0] >= arrived) | (edges[:, 1] >= arrived)
        edges = edges[touch]
    graph = merge_edges(state.graph, edges, arrived + b)
    total_ms = (time.perf_counter() - t_start) * 1e3
    record = StepRecord(len(state.log), b, arrived + b, float(arrived), arrived, feats.shape[0], 0.0, 0.0, learn_ms, total_ms)
    return PipelineState(
        graph=graph,
        features=feats,
        model=state.model,
        labels=np.concatenate([state.labels, np.zeros(b, dtype=np.int64)]),
        cfg=cfg,
        log=list(state.log) + [record],
    )


def run(
    X: np.ndarray,
    g0: Graph | None,
    cfg: PipelineConfig,
    model: ClusterModel | None = None,
) -> tuple[Graph, RunReport, PipelineState]:
    """Full protocol: split, train once, integrate T batches.

    Node ids in the returned graph follow arrival order; ``report.order``
    maps them back to input rows (``order[node] = input row``). When an
    initial graph is supplied its nodes are the static prefix, so only the
    remaining rows are shuffled into batches.
    """
    cfg.validate()
    t_start = time.perf_counter()
    n = X.shape[0]
    if g0 is not None:
        if g0.n > n:
            raise ValueError("initial graph larger than feature matrix")
        static = np.arange(g0.n)
        rest = np.random.default_rng(cfg.seed).permutation(np.arange(g0.n, n))
        batches = _even_batches(rest, cfg.T)
    else:
        static, batches = split_expanding(X, cfg.r_split, cfg.T, cfg.seed)
    state = init(X[static], g0, cfg, model=model)
    for batch in batches:
        state = step(state, X[batch])
    order = np.concatenate([static] + batches) if batches else static
    total_ms = (time.perf_counter() - t_start) * 1e3
    report = RunReport(
        order=order,
        steps=state.log,
        clust_ms=sum(r.clust_ms for r in state.log),
        coar_ms=sum(r.coar_ms for r in state.log),
        learn_ms=sum(r.learn_ms for r in state.log),
        total_ms=total_ms,
    )
    return state.graph, report, state


def relabel(g: Graph, mapping: np.ndarray) -> Graph:
    """Rewrite node ids through ``mapping[node]`` (a permutation)."""
    arr = g.edge_array()
    if arr.shape[0] == 0:
        return build_graph(g.n, arr)
    m = np.asarray(mapping, dtype=np.int64)
    return build_graph(
        g.n, canonical_edges(m[arr[:, 0].astype(np.int64)], m[arr[:, 1].astype(np.int64)], arr[:, 2], n=g.n)
    )


# ---------------------------------------------------------------------------
# neighborhood preservation check


@dataclass
class ContainmentReport:
    per_node: np.ndarray  # |N_k ∩ ω| / |N_k| for each incoming node
    rate: float  # mean over incoming nodes
    omega_sizes: np.ndarray
    preservation_bound: float  # product of per-distance collision bounds


def exact_neighborhood(X_comm: np.ndarray, X_inc: np.ndarray, k: int) -> list[np.ndarray]:
    """Brute-force top-k community neighbors of each incoming node, ties at
    the boundary broken by the smaller index."""
    k = min(k, X_comm.shape[0])
    out = []
    for x in X_inc:
        d2 = ((X_comm - x) ** 2).sum(1)
        order = np.lexsort((np.arange(d2.shape[0]), d2))
        out.append(np.sort(order[:k]))
    return out


def neighborhood_check(
    state: PipelineState,
    community: int,
    incoming: np.ndarray,
    knn_k: int | None = None,
    identity: bool = False,
) -> ContainmentReport:
    """Compare the coarse-stage candidate sets against the exact top-k
    neighborhoods of the incoming nodes inside one community."""
    cfg = state.cfg
    k = knn_k if knn_k is not None else cfg.knn_k
    members = np.flatnonzero(state.labels == community)
    if members.size == 0:
        raise ValueError(f"community {community} has no members")
    sub, _ = induced_subgraph(state.graph, members)
    X_comm = state.features[members]
    if identity:
        coar = identity_coarsening(sub, X_comm)
        r_bin_used = 1.0  # no hashing involved; bound reported against unit width
    else:
        r_bin_used = cfg.coar_r_bin if cfg.coar_r_bin > 0 else auto_bin_width(
            X_comm, seed=_child_seed(cfg.seed, 9000, community, 1)
        )
        fam = LshFamily.generate(
            d=X_comm.shape[1], h=cfg.coar_h, r_bin=r_bin_used,
            seed=_child_seed(cfg.seed, 9000, community, 2),
        )
        coar = coarsen(sub, X_comm, fam)
    conn = _coarse_connections(
        cfg.learner_coarse, coar.super_features, incoming,
        seed=_child_seed(cfg.seed, 9000, community, 3),
    )
    omega = candidate_set(coar, dict(enumerate(conn)))
    exact = exact_neighborhood(X_comm, incoming, k)
    fractions = np.empty(incoming.shape[0])
    sizes = np.empty(incoming.shape[0], dtype=np.int64)
    log_bound = 0.0
    for i in range(incoming.shape[0]):
        w = omega[i]
        sizes[i] = w.shape[0]
        nk = exact[i]
        inter = np.intersect1d(nk, w, assume_unique=True).shape[0]
        fractions[i] = inter / nk.shape[0] if nk.shape[0] else 1.0
        d = np.sqrt(((X_comm[nk] - incoming[i]) ** 2).sum(1))
        for c in d:
            log_bound += np.log(max(collision_bound(float(c), float(r_bin_used)), 1e-300))
    return ContainmentReport(
        per_node=fractions,
        rate=float(fractions.mean()) if fractions.size else 1.0,
        omega_sizes=sizes,
        preservation_bound=float(np.exp(log_bound)),
    )
