"""Command-line surface: synth | learn | grow | eval | bench.

Heavy imports happen inside the handlers so the GRAPHFLEX_THREADS
environment variable can cap BLAS worker counts before numpy loads
(0 means fully single-threaded deterministic mode).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _apply_thread_cap() -> None:
    cap = os.environ.get("GRAPHFLEX_THREADS")
    if cap is None:
        return
    try:
        workers = max(1, int(cap))
    except ValueError:
        raise SystemExit(f"GRAPHFLEX_THREADS must be an integer, got {cap!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, str(workers))


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphflex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="generate a synthetic dataset")
    ps.add_argument("--kind", required=True, choices=["dcsbm", "sw", "he", "geometric", "grid", "blobs"])
    ps.add_argument("--n", type=int, default=1000)
    ps.add_argument("--classes", type=int, default=4)
    ps.add_argument("--d", type=int, default=32)
    ps.add_argument("--sep", type=float, default=1.0)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--k-ring", type=int, default=8, help="sw: ring degree")
    ps.add_argument("--p-rewire", type=float, default=0.1, help="sw: rewiring probability")
    ps.add_argument("--alpha", type=float, default=0.0, help="he: cross-class edge fraction")
    ps.add_argument("--mean-degree", type=float, default=8.0, help="he: target mean degree")
    ps.add_argument("--p-intra", type=float, default=0.2, help="dcsbm: within-block probability")
    ps.add_argument("--p-inter", type=float, default=0.02, help="dcsbm: between-block probability")
    ps.add_argument("--radius", type=float, default=0.1, help="geometric: connection radius")
    ps.add_argument("--rows", type=int, default=20, help="grid: rows")
    ps.add_argument("--cols", type=int, default=20, help="grid: cols")
    ps.add_argument("--format", choices=["fmtx", "csv"], default="fmtx")
    ps.add_argument("--out-prefix", required=True)

    pl = sub.add_parser("learn", help="one-shot structure learning on a feature file")
    pl.add_argument("--features", required=True)
    pl.add_argument("--method", required=True, choices=["knn", "ann", "cov", "l2", "log", "large", "glasso"])
    pl.add_argument("--k", type=int, default=5)
    pl.add_argument("--sigma", type=float, default=0.0)
    pl.add_argument("--density", type=float, default=0.05)
    pl.add_argument("--alpha", type=float, default=1.0)
    pl.add_argument("--beta", type=float, default=0.5)
    pl.add_argument("--rho", type=float, default=0.1)
    pl.add_argument("--max-iter", type=int, default=20000)
    pl.add_argument("--tol", type=float, default=1e-6)
    pl.add_argument("--h", type=int, default=8)
    pl.add_argument("--r-bin", type=float, default=0.0)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out", required=True)

    pg = sub.add_parser("grow", help="run the incremental pipeline")
    pg.add_argument("--features", required=True)
    pg.add_argument("--init-edges", help="optional initial graph (its nodes = first feature rows)")
    pg.add_argument("--init-n", type=int, default=0, help="node count of the initial graph")
    pg.add_argument("--config", required=True, help="flat JSON pipeline config")
    pg.add_argument("--out", required=True, help="final edge list (input-row indexing)")
    pg.add_argument("--report", help="per-step CSV report")
    pg.add_argument("--resume", help="reuse a serialized cluster model instead of training")
    pg.add_argument("--save-model", help="serialize the trained cluster model")

    pe = sub.add_parser("eval", help="edge/cluster metrics, or the collision bound table")
    pe.add_argument("mode", nargs="?", choices=["bound"], help="'bound' prints the (c, exact, bound, empirical) table")
    pe.add_argument("--learned")
    pe.add_argument("--truth")
    pe.add_argument("--labels")
    pe.add_argument("--csv", help="also write the metrics as CSV here")
    pe.add_argument("--r-bin", type=float, default=1.0)
    pe.add_argument("--c-grid", default="0.1,0.25,0.5,1,2,5")
    pe.add_argument("--trials", type=int, default=100000)
    pe.add_argument("--seed", type=int, default=0)

    pb = sub.add_parser("bench", help="runtime scaling harness")
    pb.add_argument("--n-grid", required=True, help="comma-separated sizes, increasing")
    pb.add_argument("--config", help="flat JSON pipeline config (default: knn pipeline)")
    pb.add_argument("--classes", type=int, default=16)
    pb.add_argument("--d", type=int, default=8)
    pb.add_argument("--sep", type=float, default=8.0)
    pb.add_argument("--repeats", type=int, default=3)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--out", help="write the CSV here as well as stdout")
    return p


def _cmd_synth(args) -> int:
    import numpy as np

    from . import io, synth

    if args.kind == "dcsbm":
        P = np.full((args.classes, args.classes), args.p_inter)
        np.fill_diagonal(P, args.p_intra)
        params = synth.DcsbmParams(n=args.n, k=args.classes, P=P, rho=1.0, seed=args.seed)
        ds = synth.gen_dcsbm(params, d=args.d, sep=args.sep)
    elif args.kind == "sw":
        ds = synth.gen_small_world(args.n, args.k_ring, args.p_rewire, args.classes,
                                   seed=args.seed, d=args.d, sep=args.sep)
    elif args.kind == "he":
        ds = synth.gen_heterophily(args.n, args.classes, args.alpha, args.mean_degree,
                                   seed=args.seed, d=args.d, sep=args.sep)
    elif args.kind == "geometric":
        ds = synth.gen_geometric(args.n, args.radius, seed=args.seed)
    elif args.kind == "grid":
        ds = synth.gen_grid(args.rows, args.cols)
    else:
        ds = synth.gen_blobs(args.n, args.classes, d=args.d, sep=args.sep, seed=args.seed)
    ext = "fmtx" if args.format == "fmtx" else "csv"
    io.write_features(f"{args.out_prefix}.{ext}", ds.features, fmt=args.format)
    io.write_labels(f"{args.out_prefix}.labels", ds.labels)
    if ds.graph is not None:
        io.write_edges(ds.graph, f"{args.out_prefix}.edges")
    print(f"wrote {args.out_prefix}.{ext} ({ds.features.shape[0]}x{ds.features.shape[1]})")
    return 0


def _cmd_learn(args) -> int:
    from . import io
    from .graph import build_graph
    from .pipeline import LearnerSpec, run_learner

    X = io.read_features(args.features)
    spec = LearnerSpec(
        method=args.method, k=args.k, sigma=args.sigma, density=args.density,
        alpha=args.alpha, beta=args.beta, rho=args.rho, max_iter=args.max_iter,
        tol=args.tol, h=args.h, r_bin=args.r_bin,
    )
    edges = run_learner(spec, X, seed=args.seed)
    io.write_edges(build_graph(X.shape[0], edges), args.out)
    print(f"wrote {args.out} ({edges.shape[0]} edges)")
    return 0


def _cmd_grow(args) -> int:
    from . import io
    from .clustering import load_model, save_model
    from .pipeline import config_from_json, relabel, run

    X = io.read_features(args.features)
    cfg = config_from_json(args.config)
    g0 = None
    if args.init_edges:
        n0 = args.init_n or io.edge_file_node_count(args.init_edges)
        g0 = io.read_edges(args.init_edges, n0)
    model = load_model(args.resume) if args.resume else None
    graph, report, state = run(X, g0, cfg, model=model)
    # emit edges in the input-row indexing, not arrival order
    io.write_edges(relabel(graph, report.order), args.out)
    if args.save_model:
        save_model(args.save_model, state.model)
    if args.report:
        with open(args.report, "w") as f:
            f.write("step,nodes,omega_mean,omega_max,clust_ms,coar_ms,learn_ms,total_ms\n")
            for r in report.steps:
                f.write(
                    f"{r.step},{r.total_nodes},{r.omega_mean:.2f},{r.omega_max},"
                    f"{r.clust_ms:.3f},{r.coar_ms:.3f},{r.learn_ms:.3f},{r.total_ms:.3f}\n"
                )
    print(f"wrote {args.out} ({graph.num_edges} edges over {graph.n} nodes)")
    return 0


def _cmd_eval(args) -> int:
    from . import io, metrics

    if args.mode == "bound":
        grid = [float(x) for x in args.c_grid.split(",") if x]
        rows = metrics.bound_table(args.r_bin, grid, trials=args.trials, seed=args.seed)
        print("c,exact,bound,empirical")
        for r in rows:
            print(f"{r['c']},{r['exact']:.9f},{r['bound']:.9f},{r['empirical']:.6f}")
        return 0
    if not args.learned or not args.truth:
        print("error: eval requires --learned and --truth (or the 'bound' mode)", file=sys.stderr)
        return 2
    n = max(io.edge_file_node_count(args.learned), io.edge_file_node_count(args.truth))
    learned = io.read_edges(args.learned, n)
    truth = io.read_edges(args.truth, n)
    em = metrics.edge_prf(learned, truth)
    block = {
        "precision": em.precision,
        "recall": em.recall,
        "f1": em.f1,
        "true_edges": em.true_edges,
        "learned_edges": em.learned_edges,
        "common": em.common,
    }
    if args.labels:
        labels = io.read_labels(args.labels)
        block["modularity_learned"] = metrics.modularity(learned, labels)
        block["conductance_learned"] = metrics.conductance(learned, labels)
    print(json.dumps(block, indent=2, sort_keys=True))
    if args.csv:
        with open(args.csv, "w") as f:
            keys = sorted(block)
            f.write(",".join(keys) + "\n")
            f.write(",".join(str(block[k]) for k in keys) + "\n")
    return 0


def _cmd_bench(args) -> int:
    from . import synth
    from .bench import records_to_csv, scaling_run
    from .pipeline import config_from_json, PipelineConfig

    grid = [int(x) for x in args.n_grid.split(",") if x]
    cfg = config_from_json(args.config) if args.config else PipelineConfig(
        clust_k=args.classes, T=10, seed=args.seed
    )

    def generator(n):
        return synth.gen_blobs(n, classes=args.classes, d=args.d, sep=args.sep, seed=args.seed).features

    records, slope = scaling_run(generator, grid, cfg, repeats=args.repeats)
    csv = records_to_csv(records, slope)
    print(csv, end="")
    if args.out:
        with open(args.out, "w") as f:
            f.write(csv)
    return 0


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "learn": _cmd_learn,
        "grow": _cmd_grow,
        "eval": _cmd_eval,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
