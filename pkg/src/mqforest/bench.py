"""Experiment harness: workloads, the six experiment protocols and CSV output.

Every experiment is a pure function of its :class:`ExperimentConfig`; all
randomness is derived from ``cfg.seed``, so reruns give byte-identical CSV.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .core import DataMatrix, l2_normalize
from .data import (GroundTruth, brute_force_knn, gen_clustered_sphere, gen_uniform_sphere,
                   load_vectors, recall, split_queries)
from .forest import DEFAULT_NS, DEFAULT_V, build_forest, query_mq, query_rp
from .hashing import spawn_rngs
from .stats import CltReport, clt_coordinate_experiment, empirical_hash_covariance, kappa

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid experiment or CLI configuration."""


# Desk-scale generator presets.  The clustered preset draws each cluster's
# noise from an 8-dimensional subspace to mimic the low local intrinsic
# dimensionality of learned embeddings.  The coarse preset has few large
# clusters, so neighbourhoods of several thousand points stay in one cluster.
PRESETS: dict[str, dict] = {
    "uniform": {"kind": "uniform", "n": 100_000, "d": 200},
    "clustered": {"kind": "clustered", "n": 100_000, "d": 64, "clusters": 50,
                  "spread": 0.22, "intrinsic_dim": 8},
    "clustered-coarse": {"kind": "clustered", "n": 100_000, "d": 64, "clusters": 10,
                         "spread": 0.1, "intrinsic_dim": None},
    "clustered-isotropic": {"kind": "clustered", "n": 100_000, "d": 64, "clusters": 50,
                            "spread": 0.15, "intrinsic_dim": None},
}

MODES = ("rp", "mq", "both")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "clustered"
    num_queries: int = 250
    k: int = 100
    trees: tuple[int, ...] = (8, 16, 32)
    n_s: int = DEFAULT_NS
    v: int = DEFAULT_V
    seed: int = 0
    out_dir: str | None = None
    mode: str = "both"
    num_functions: int = 1000
    m_list: tuple[int, ...] = (100, 200, 500, 1000, 2000, 5000)
    num_planes: int = 1000
    b_tol: float = 0.005
    r: int = 300

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(int(t) for t in self.trees))
        object.__setattr__(self, "m_list", tuple(int(m) for m in self.m_list))
        counts = {"num_queries": self.num_queries, "k": self.k, "n_s": self.n_s, "v": self.v,
                  "num_functions": self.num_functions, "num_planes": self.num_planes, "r": self.r}
        for name, val in counts.items():
            if int(val) != val or val < 1:
                raise ConfigError(f"{name} must be a positive integer, got {val}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**63:
            raise ConfigError("seed must be an integer in [0, 2**63)")
        if not self.trees or min(self.trees) < 1:
            raise ConfigError("tree counts must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.b_tol <= 0:
            raise ConfigError("b_tol must be positive")


def parse_dataset_spec(spec: str) -> dict:
    """``preset``, ``preset:key=val,...`` or a path to an fvecs file."""
    name, _, rest = spec.partition(":")
    if name not in PRESETS:
        if rest or not os.path.exists(spec):
            raise ConfigError(f"unknown dataset {spec!r}: not a preset ({', '.join(PRESETS)}) or a file")
        return {"kind": "file", "path": spec}
    out = dict(PRESETS[name])
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        key = key.strip().replace("-", "_")
        if not eq or key not in out or key == "kind":
            raise ConfigError(f"bad dataset option {item!r} for {name}")
        try:
            out[key] = None if val.lower() == "none" else (float(val) if key == "spread" else int(val))
        except ValueError as exc:
            raise ConfigError(f"bad value in {item!r}") from exc
    return out


def load_dataset(spec: str, seed: int) -> DataMatrix:
    params = parse_dataset_spec(spec)
    kind = params["kind"]
    if kind == "file":
        return load_vectors(params["path"])
    if kind == "uniform":
        return gen_uniform_sphere(params["n"], params["d"], seed=seed)
    data, _ = gen_clustered_sphere(params["n"], params["d"], params["clusters"], params["spread"],
                                   seed=seed, intrinsic_dim=params["intrinsic_dim"])
    return data


def derive_seed(seed: int, tag: int) -> int:
    """Independent integer seed for one sub-task of an experiment."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, tag]).generate_state(1)[0])


_SPLIT, _FOREST, _HASH, _KAPPA, _COV, _CLT = range(1, 7)


@dataclass
class Workload:
    base: DataMatrix
    queries: np.ndarray
    query_ids: np.ndarray
    seed: int
    _gt: GroundTruth | None = field(default=None, repr=False)

    def ground_truth(self, k: int) -> GroundTruth:
        if self._gt is None or self._gt.k < k:
            t0 = time.perf_counter()
            self._gt = brute_force_knn(self.base, self.queries, k)
            log.info("ground truth k=%d for %d queries in %.1fs", k, len(self.queries),
                     time.perf_counter() - t0)
        if self._gt.k == k:
            return self._gt
        return GroundTruth(self._gt.ids[:, :k], self._gt.distances[:, :k])


def make_workload(cfg: ExperimentConfig, data: DataMatrix | None = None) -> Workload:
    t0 = time.perf_counter()
    if data is None:
        data = load_dataset(cfg.dataset, cfg.seed)
    if cfg.k > len(data) - cfg.num_queries:
        raise ConfigError(f"k={cfg.k} exceeds the {len(data) - cfg.num_queries} points left after "
                          f"drawing {cfg.num_queries} queries")
    base, queries, qids = split_queries(data, cfg.num_queries, seed=derive_seed(cfg.seed, _SPLIT))
    log.info("workload: %d x %d base, %d queries (%.1fs)", len(base), base.dim, len(queries),
             time.perf_counter() - t0)
    return Workload(base, queries, qids, cfg.seed)


# -- output -------------------------------------------------------------------

@dataclass
class Table:
    header: tuple[str, ...]
    rows: list[tuple]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_cell(x) for x in row])
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.csv_text())
        return path

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def _emit(cfg: ExperimentConfig, name: str, table: Table) -> None:
    if cfg.out_dir is not None:
        path = table.write(Path(cfg.out_dir) / name)
        log.info("wrote %s", path)


def worker_count() -> int:
    env = os.environ.get("MQF_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"MQF_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("MQF_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def ordered_map(fn: Callable, items: Iterable) -> list:
    """``map`` over a thread pool; results keep the input order."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _modes(cfg: ExperimentConfig) -> tuple[str, ...]:
    return ("rp", "mq") if cfg.mode == "both" else (cfg.mode,)


# -- experiments ----------------------------------------------------------------

def run_recall_experiment(cfg: ExperimentConfig, workload: Workload | None = None) -> Table:
    """Mean recall@k and distance computations per tree count and mode.

    One forest of ``max(trees)`` trees is built; the forest for ``T`` trees
    is its first ``T`` trees, so every mode and tree count shares trees.
    """
    wl = workload or make_workload(cfg)
    gt = wl.ground_truth(cfg.k)
    t0 = time.perf_counter()
    forest = build_forest(wl.base, max(cfg.trees), cfg.n_s, seed=derive_seed(cfg.seed, _FOREST))
    log.info("built %d trees in %.1fs", len(forest), time.perf_counter() - t0)
    rows = []
    for T in cfg.trees:
        f = forest.head(T)
        for mode in _modes(cfg):
            if mode == "mq" and cfg.v > T:
                raise ConfigError(f"v={cfg.v} exceeds the tree count {T}")

            def one(i, f=f, mode=mode):
                res = query_rp(f, wl.queries[i], cfg.k) if mode == "rp" else \
                    query_mq(f, wl.queries[i], cfg.k, cfg.v)
                return recall(res.ids, gt.ids[i]), res.distance_computations

            t1 = time.perf_counter()
            out = np.array(ordered_map(one, range(len(wl.queries))), dtype=np.float64)
            rows.append((T, mode, float(out[:, 0].mean()), float(out[:, 1].mean())))
            log.info("T=%d %s recall %.4f dc %.1f (%.1fs)", T, mode, rows[-1][2], rows[-1][3],
                     time.perf_counter() - t1)
    table = Table(("tree_count", "mode", "mean_recall", "mean_distance_computations"), rows)
    _emit(cfg, "recall.csv", table)
    return table


@dataclass
class HashFailureResult:
    recall_q: np.ndarray   # (queries, functions)
    recall_c: np.ndarray
    threshold: float = 0.2

    def failures(self, which: str) -> int:
        r = self.recall_q if which == "q" else self.recall_c
        return int(np.count_nonzero(r < self.threshold))

    def table(self) -> Table:
        rows = []
        for label, r in (("q", self.recall_q), ("c", self.recall_c)):
            for qi in range(r.shape[0]):
                rows.extend((qi, fi, label, float(x)) for fi, x in enumerate(r[qi]))
        return Table(("query", "function", "input", "recall"), rows)


def run_hash_failure_experiment(cfg: ExperimentConfig, workload: Workload | None = None) -> HashFailureResult:
    """Per (function, query) fraction of ``knn(q)`` sharing the input's bit.

    Functions come from the RP-Tree family with offsets bounded by the whole
    base set.  Both inputs (``q`` and the normalised centroid of ``knn(q)``)
    are scored against the same functions.
    """
    wl = workload or make_workload(cfg)
    gt = wl.ground_truth(cfg.k)
    rng = np.random.default_rng(derive_seed(cfg.seed, _HASH))
    X = wl.base.rows.astype(np.float64)
    W = rng.standard_normal((cfg.num_functions, wl.base.dim))
    lo = np.empty(cfg.num_functions)
    hi = np.empty(cfg.num_functions)
    for s in range(0, cfg.num_functions, 100):
        P = X @ W[s:s + 100].T
        lo[s:s + 100], hi[s:s + 100] = P.min(axis=0), P.max(axis=0)
    a = rng.uniform(lo, hi)

    def one(i):
        A = X[gt.ids[i]]
        c = l2_normalize(A.mean(axis=0))
        bits = (A @ W.T) > a
        rq = np.mean(bits == ((W @ wl.queries[i]) > a), axis=0)
        rc = np.mean(bits == ((W @ c) > a), axis=0)
        return rq, rc

    out = ordered_map(one, range(len(wl.queries)))
    res = HashFailureResult(np.array([o[0] for o in out]), np.array([o[1] for o in out]))
    log.info("hash failures (recall < %.2f): q %d, c %d", res.threshold, res.failures("q"),
             res.failures("c"))
    _emit(cfg, "hash_failure.csv", res.table())
    return res


def run_kappa_experiment(cfg: ExperimentConfig, workload: Workload | None = None) -> Table:
    """Mean kappa of the centroid of ``k`` points drawn from the ``m`` nearest."""
    if any(m < cfg.k for m in cfg.m_list):
        raise ConfigError(f"every m must be >= k={cfg.k}")
    wl = workload or make_workload(cfg)
    gt = wl.ground_truth(max(cfg.m_list))
    X = wl.base.rows
    rngs = spawn_rngs(derive_seed(cfg.seed, _KAPPA), len(wl.queries))

    def one(i):
        rng = rngs[i]
        c = l2_normalize(X[gt.ids[i, :cfg.k]].astype(np.float64).mean(axis=0))
        out = []
        for m in cfg.m_list:
            pick = np.sort(rng.choice(m, size=cfg.k, replace=False))
            ch = l2_normalize(X[gt.ids[i, pick]].astype(np.float64).mean(axis=0))
            out.append(kappa(wl.queries[i], c, ch))
        return out

    K = np.array(ordered_map(one, range(len(wl.queries))))
    table = Table(("m", "mean_kappa"), [(m, float(K[:, j].mean())) for j, m in enumerate(cfg.m_list)])
    _emit(cfg, "kappa.csv", table)
    return table


def run_delta_knn_experiment(cfg: ExperimentConfig, workload: Workload | None = None) -> Table:
    """Mean number of queue insertions contributed by each tree, per mode."""
    wl = workload or make_workload(cfg)
    T = max(cfg.trees)
    forest = build_forest(wl.base, T, cfg.n_s, seed=derive_seed(cfg.seed, _FOREST))
    rows = []
    for mode in _modes(cfg):
        def one(i, mode=mode):
            if mode == "rp":
                return query_rp(forest, wl.queries[i], cfg.k).per_tree_delta_knn
            return query_mq(forest, wl.queries[i], cfg.k, min(cfg.v, T)).per_tree_delta_knn

        D = np.array(ordered_map(one, range(len(wl.queries))), dtype=np.float64)
        rows.extend((t + 1, mode, float(D[:, t].mean())) for t in range(T))
    table = Table(("tree_index", "mode", "mean_insertions"), rows)
    _emit(cfg, "delta_knn.csv", table)
    return table


COV_BINS = np.linspace(-1.0, 1.0, 401)


@dataclass
class CovarianceResult:
    mean_offdiag: dict[str, float]
    counts: dict[str, np.ndarray]
    per_query_mean: dict[str, np.ndarray]

    def histogram_table(self) -> Table:
        rows = []
        for label in ("q", "c"):
            rows.extend((label, float(COV_BINS[j]), float(COV_BINS[j + 1]), int(n))
                        for j, n in enumerate(self.counts[label]))
        return Table(("input", "bin_left", "bin_right", "count"), rows)

    def summary_table(self) -> Table:
        return Table(("input", "mean_offdiag", "entries"),
                     [(label, self.mean_offdiag[label], int(self.counts[label].sum()))
                      for label in ("q", "c")])


def run_covariance_experiment(cfg: ExperimentConfig, workload: Workload | None = None) -> CovarianceResult:
    """Off-diagonal covariance of neighbour heights for planes nearly through the input."""
    wl = workload or make_workload(cfg)
    gt = wl.ground_truth(cfg.k)
    X = wl.base.rows
    rngs = spawn_rngs(derive_seed(cfg.seed, _COV), len(wl.queries))

    def one(i):
        A = X[gt.ids[i]].astype(np.float64)
        inputs = {"q": wl.queries[i], "c": l2_normalize(A.mean(axis=0))}
        return {label: empirical_hash_covariance(A, u, cfg.num_planes, cfg.b_tol, rngs[i]).offdiag
                for label, u in inputs.items()}

    out = ordered_map(one, range(len(wl.queries)))
    res = CovarianceResult({}, {}, {})
    for label in ("q", "c"):
        vals = [o[label] for o in out]
        res.per_query_mean[label] = np.array([v.mean() for v in vals])
        allv = np.concatenate(vals)
        res.mean_offdiag[label] = float(allv.mean())
        res.counts[label] = np.histogram(np.clip(allv, -1.0, 1.0), bins=COV_BINS)[0]
    log.info("mean off-diagonal covariance: q %.5f, c %.5f", res.mean_offdiag["q"], res.mean_offdiag["c"])
    _emit(cfg, "covariance_hist.csv", res.histogram_table())
    _emit(cfg, "covariance_summary.csv", res.summary_table())
    return res


def clt_tables(rep: CltReport) -> tuple[Table, Table]:
    samples = Table(("query", "c_minus_mu", "chat_minus_mu", "chat_minus_c", "scaled_c_minus_mu"),
                    [(i, float(a), float(b), float(c), float(d)) for i, (a, b, c, d) in enumerate(
                        zip(rep.c_minus_mu, rep.chat_minus_mu, rep.chat_minus_c, rep.scaled_c_minus_mu))])
    summary = Table(("queries", "coordinate", "ks_statistic", "ks_p_value", "violations",
                     "var_c_minus_mu", "var_chat_minus_c"),
                    [(len(rep.c_minus_mu), rep.coordinate, rep.ks_statistic, rep.ks_p_value,
                      rep.violations, rep.var_c_minus_mu, rep.var_chat_minus_c)])
    return samples, summary


def run_clt_experiment(cfg: ExperimentConfig, workload: Workload | None = None) -> CltReport:
    wl = workload or make_workload(cfg)
    if cfg.r > len(wl.base):
        raise ConfigError(f"r={cfg.r} exceeds the base set size {len(wl.base)}")
    rep = clt_coordinate_experiment(wl.base, wl.queries, cfg.k, cfg.r,
                                    rng=derive_seed(cfg.seed, _CLT),
                                    ground_truth=wl.ground_truth(cfg.r))
    log.info("clt: ks p %.4f, violations %d", rep.ks_p_value, rep.violations)
    samples, summary = clt_tables(rep)
    _emit(cfg, "clt_samples.csv", samples)
    _emit(cfg, "clt_summary.csv", summary)
    return rep


EXPERIMENTS: dict[str, Callable] = {
    "recall": run_recall_experiment,
    "hash-failure": run_hash_failure_experiment,
    "kappa": run_kappa_experiment,
    "delta-knn": run_delta_knn_experiment,
    "covariance": run_covariance_experiment,
    "clt": run_clt_experiment,
}
