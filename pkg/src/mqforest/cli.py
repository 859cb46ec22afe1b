"""Command line interface: ``mqforest gen | ground-truth | build | query | bench``.

Exit status is 0 on success, 2 on a configuration error and 1 on any other
failure.  Progress goes to standard error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from .bench import EXPERIMENTS, ConfigError, ExperimentConfig, Table, derive_seed, load_dataset
from .data import GroundTruth, brute_force_knn, load_raw_vectors, load_vectors, recall, save_vectors, split_queries
from .forest import DEFAULT_NS, DEFAULT_V, build_forest, load_forest, query_mq, query_rp, save_forest

log = logging.getLogger("mqforest")

# per-experiment defaults for the query count and tree list
BENCH_DEFAULTS = {
    "recall": (250, "8,16,32"),
    "hash-failure": (100, "8"),
    "kappa": (250, "8"),
    "delta-knn": (100, "19"),
    "covariance": (100, "8"),
    "clt": (1000, "8"),
}


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive(name: str, val: int) -> int:
    if val < 1:
        raise ConfigError(f"--{name} must be >= 1, got {val}")
    return val


def cmd_gen(args) -> None:
    data = load_dataset(args.data, args.seed)
    if args.num_queries:
        if not 0 < args.num_queries < len(data):
            raise ConfigError(f"--num-queries must be in 1..{len(data) - 1}")
        if not args.queries:
            raise ConfigError("--num-queries needs --queries to name the query file")
        data, queries, _ = split_queries(data, args.num_queries, seed=derive_seed(args.seed, 1))
        save_vectors(queries, args.queries)
        log.info("wrote %d queries to %s", len(queries), args.queries)
    save_vectors(data, args.out)
    log.info("wrote %d x %d vectors to %s", len(data), data.dim, args.out)


def cmd_ground_truth(args) -> None:
    data = load_vectors(args.data)
    queries = load_raw_vectors(args.queries).astype(np.float64)
    if not 1 <= args.k <= len(data):
        raise ConfigError(f"--k must be in 1..{len(data)}")
    gt = brute_force_knn(data, queries, args.k)
    gt.save(f"{args.out}.ivecs", f"{args.out}.dist.fvecs")
    log.info("wrote ground truth for %d queries to %s.ivecs / %s.dist.fvecs", len(queries), args.out, args.out)


def cmd_build(args) -> None:
    data = load_vectors(args.data)
    _positive("trees", args.trees)
    _positive("ns", args.ns)
    t0 = time.perf_counter()
    forest = build_forest(data, args.trees, args.ns, seed=args.seed)
    save_forest(forest, args.out)
    log.info("built %d trees in %.1fs, saved to %s", args.trees, time.perf_counter() - t0, args.out)


def cmd_query(args) -> None:
    data = load_vectors(args.data)
    forest = load_forest(args.forest, data)
    queries = load_raw_vectors(args.queries).astype(np.float64)
    _positive("k", args.k)
    if args.mode != "rp" and not 1 <= args.v <= len(forest):
        raise ConfigError(f"--v must be in 1..{len(forest)}")
    gt = GroundTruth.load(f"{args.ground_truth}.ivecs", f"{args.ground_truth}.dist.fvecs") \
        if args.ground_truth else None
    modes = ("rp", "mq") if args.mode == "both" else (args.mode,)
    rows = []
    for mode in modes:
        recalls, costs = [], []
        for qi, q in enumerate(queries):
            res = query_rp(forest, q, args.k) if mode == "rp" else query_mq(forest, q, args.k, args.v)
            costs.append(res.distance_computations)
            rows.extend((qi, mode, rank, pid, dist, res.distance_computations)
                        for rank, (pid, dist) in enumerate(res.neighbours))
            if gt is not None:
                recalls.append(recall(res.ids, gt.ids[qi, :args.k]))
        msg = f"{mode}: mean distance computations {np.mean(costs):.1f}"
        if recalls:
            msg += f", mean recall@{args.k} {np.mean(recalls):.4f}"
        log.info(msg)
    table = Table(("query", "mode", "rank", "id", "distance", "distance_computations"), rows)
    if args.out:
        table.write(args.out)
    else:
        sys.stdout.write(table.csv_text())


def cmd_bench(args) -> None:
    nq, trees = BENCH_DEFAULTS[args.kind]
    cfg = ExperimentConfig(
        dataset=args.data,
        num_queries=args.num_queries or nq,
        k=args.k,
        trees=args.trees or _int_list(trees),
        n_s=args.ns,
        v=args.v,
        seed=args.seed,
        out_dir=args.out,
        mode=args.mode,
        num_functions=args.functions,
        m_list=args.m_list,
        num_planes=args.planes,
        b_tol=args.b_tol,
        r=args.r,
    )
    t0 = time.perf_counter()
    EXPERIMENTS[args.kind](cfg)
    log.info("%s finished in %.1fs", args.kind, time.perf_counter() - t0)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mqforest", description="RP-Forest and MQ-Forest nearest neighbour search.")
    p.add_argument("--quiet", action="store_true", help="only log warnings")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset as fvecs")
    g.add_argument("--data", default="clustered", help="preset[:key=val,...] (uniform, clustered, clustered-coarse, clustered-isotropic)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--num-queries", type=int, default=0, help="draw and exclude this many queries")
    g.add_argument("--queries", help="where to write the queries")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("ground-truth", help="exact kNN by linear scan")
    t.add_argument("--data", required=True)
    t.add_argument("--queries", required=True)
    t.add_argument("--k", type=int, default=100)
    t.add_argument("--out", required=True, help="prefix for PREFIX.ivecs and PREFIX.dist.fvecs")
    t.set_defaults(func=cmd_ground_truth)

    b = sub.add_parser("build", help="build and save a forest")
    b.add_argument("--data", required=True)
    b.add_argument("--trees", type=int, default=32)
    b.add_argument("--ns", type=int, default=DEFAULT_NS)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="query a saved forest")
    q.add_argument("--data", required=True)
    q.add_argument("--forest", required=True)
    q.add_argument("--queries", required=True)
    q.add_argument("--k", type=int, default=100)
    q.add_argument("--mode", choices=("rp", "mq", "both"), default="both")
    q.add_argument("--v", type=int, default=DEFAULT_V)
    q.add_argument("--ground-truth", help="prefix written by ground-truth, to report recall")
    q.add_argument("--out", help="CSV path (default: standard output)")
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("bench", help="run one experiment protocol")
    e.add_argument("kind", choices=sorted(EXPERIMENTS))
    e.add_argument("--data", default="clustered", help="preset[:key=val,...] or an fvecs path")
    e.add_argument("--num-queries", type=int, default=0, help="default depends on the experiment")
    e.add_argument("--k", type=int, default=100)
    e.add_argument("--trees", type=_int_list, default=None, help="comma-separated tree counts")
    e.add_argument("--ns", type=int, default=DEFAULT_NS)
    e.add_argument("--v", type=int, default=DEFAULT_V)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--mode", choices=("rp", "mq", "both"), default="both")
    e.add_argument("--functions", type=int, default=1000)
    e.add_argument("--m-list", type=_int_list, default=(100, 200, 500, 1000, 2000, 5000))
    e.add_argument("--planes", type=int, default=1000)
    e.add_argument("--b-tol", type=float, default=0.005)
    e.add_argument("--r", type=int, default=300)
    e.add_argument("--out", default="results", help="output directory")
    e.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.error("%s: %s", type(exc).__name__, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
