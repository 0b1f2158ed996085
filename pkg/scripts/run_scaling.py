#!/usr/bin/env python3
"""Timing curves for the incremental pipeline vs. a full-data baseline.

Prints a CSV with one row per (config, n) and the fitted log-log slopes.
Run single-threaded for clean exponents:

    GRAPHFLEX_THREADS=0 python scripts/run_scaling.py --n-grid 1000,2000,4000,8000
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from graphflex import synth  # noqa: E402
from graphflex.bench import records_to_csv, scaling_run  # noqa: E402
from graphflex.pipeline import LearnerSpec, PipelineConfig  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-grid", default="1000,2000,4000,8000,16000")
    ap.add_argument("--classes", type=int, default=16)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--sep", type=float, default=8.0)
    ap.add_argument("--T", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    grid = [int(x) for x in args.n_grid.split(",")]

    def generator(n):
        return synth.gen_blobs(n, classes=args.classes, d=args.d, sep=args.sep, seed=args.seed).features

    flex = PipelineConfig(
        clust_method="kmeans", clust_k=args.classes, T=args.T, r_split=0.5, seed=args.seed,
        learner_coarse=LearnerSpec("knn", k=15),
        learner_final=LearnerSpec("ann", k=5, h=4),
    )
    vanilla = PipelineConfig(vanilla=True, learner_final=LearnerSpec("knn", k=5), seed=args.seed)

    flex_records, flex_slope = scaling_run(generator, grid, flex, repeats=args.repeats)
    van_records, van_slope = scaling_run(generator, grid, vanilla, repeats=args.repeats)
    print(records_to_csv(flex_records, flex_slope), end="")
    print(records_to_csv(van_records, van_slope), end="")
    print(f"# pipeline slope {flex_slope:.3f} | vanilla slope {van_slope:.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
