"""Runtime scaling harness: time the pipeline (or a full-data baseline)
across a grid of sizes and fit the log-log growth exponent.

Timings are medians over repeats with one discarded warm-up run; slope
fits assume the harness runs single-threaded (set GRAPHFLEX_THREADS=0 on
the CLI, or pin your BLAS thread count when calling the API directly).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .pipeline import PipelineConfig, run, run_learner


@dataclass
class BenchRecord:
    config: str
    n: int
    clust_ms: float
    coar_ms: float
    learn_ms: float
    total_ms: float
    peak_final_nodes: int


def _time_once(X: np.ndarray, cfg: PipelineConfig) -> BenchRecord:
    if cfg.vanilla:
        # baseline: one full-data pass of the final learner
        t0 = time.perf_counter()
        run_learner(cfg.learner_final, X, seed=cfg.seed)
        ms = (time.perf_counter() - t0) * 1e3
        return BenchRecord("vanilla", X.shape[0], 0.0, 0.0, ms, ms, X.shape[0])
    _, report, _ = run(X, None, cfg)
    peak = max((r.final_nodes for r in report.steps), default=0)
    return BenchRecord(
        "pipeline", X.shape[0], report.clust_ms, report.coar_ms, report.learn_ms, report.total_ms, peak
    )


def scaling_run(generator, n_grid, cfg: PipelineConfig, repeats: int = 3):
    """Run the configuration over increasing sizes.

    ``generator(n)`` must return the feature matrix for size n. Returns
    (records, slope); slope is the least-squares fit of log total time vs
    log n, or None for a single-point grid.
    """
    n_grid = list(n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    records = []
    for n in n_grid:
        X = generator(n)
        _time_once(X, cfg)  # warm-up discarded
        runs = [_time_once(X, cfg) for _ in range(repeats)]
        order = np.argsort([r.total_ms for r in runs])
        records.append(runs[order[len(runs) // 2]])
    slope = None
    if len(records) >= 2:
        xs = np.log([r.n for r in records])
        ys = np.log([max(r.total_ms, 1e-9) for r in records])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return records, slope


def records_to_csv(records, slope) -> str:
    lines = ["config,n,clust_ms,coar_ms,learn_ms,total_ms,slope"]
    slope_txt = "" if slope is None else f"{slope:.4f}"
    for r in records:
        lines.append(
            f"{r.config},{r.n},{r.clust_ms:.3f},{r.coar_ms:.3f},{r.learn_ms:.3f},{r.total_ms:.3f},{slope_txt}"
        )
    return "\n".join(lines) + "\n"
