"""Synthetic datasets, fvecs/ivecs I/O and exact ground truth."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import DataMatrix
from .hashing import make_rng


class VectorFileError(ValueError):
    pass


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def gen_uniform_sphere(n: int, d: int, seed=0) -> DataMatrix:
    """Uniform points on the unit sphere (normalised Gaussian draws)."""
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    rng = make_rng(seed)
    return DataMatrix(_unit_rows(rng.standard_normal((n, d))))


def gen_clustered_sphere(n: int, d: int, num_clusters: int = 50, spread: float = 0.15,
                         seed=0, intrinsic_dim: int | None = None) -> tuple[DataMatrix, np.ndarray]:
    """Gaussian blobs around uniform random centres, projected onto the sphere.

    Each point is ``normalize(centre + spread * noise)``.  By default the noise
    is isotropic in all ``d`` coordinates.  With ``intrinsic_dim=m`` each
    cluster draws its noise inside its own random ``m``-dimensional subspace,
    which gives the low local intrinsic dimensionality typical of learned
    embeddings.

    Returns the data and the cluster label of each row.
    """
    if n < 1 or d < 2:
        raise ValueError("need n >= 1 and d >= 2")
    if num_clusters < 1:
        raise ValueError("need at least one cluster")
    if spread <= 0:
        raise ValueError("spread must be positive")
    if intrinsic_dim is not None and not 1 <= intrinsic_dim <= d:
        raise ValueError(f"intrinsic_dim must be in 1..{d}")
    rng = make_rng(seed)
    centres = _unit_rows(rng.standard_normal((num_clusters, d)))
    labels = rng.integers(0, num_clusters, size=n)
    if intrinsic_dim is None:
        noise = rng.standard_normal((n, d))
    else:
        noise = np.empty((n, d))
        for j in range(num_clusters):
            basis, _ = np.linalg.qr(rng.standard_normal((d, intrinsic_dim)))
            members = np.flatnonzero(labels == j)
            noise[members] = rng.standard_normal((members.size, intrinsic_dim)) @ basis.T
    pts = centres[labels] + spread * noise
    return DataMatrix(_unit_rows(pts)), labels


def split_queries(data: DataMatrix, num_queries: int, seed=0) -> tuple[DataMatrix, np.ndarray, np.ndarray]:
    """Draw ``num_queries`` rows as queries and remove them from the dataset.

    Returns ``(base, queries, query_ids)`` where ``query_ids`` index the
    original matrix.
    """
    if not 0 < num_queries < len(data):
        raise ValueError(f"cannot draw {num_queries} queries from {len(data)} points")
    rng = make_rng(seed)
    qids = np.sort(rng.choice(len(data), size=num_queries, replace=False))
    keep = np.ones(len(data), dtype=bool)
    keep[qids] = False
    base = DataMatrix(data.rows[keep], dtype=data.rows.dtype)
    queries = data.rows[qids].astype(np.float64)
    return base, queries, qids


# -- fvecs / ivecs ------------------------------------------------------------

def _write_vecs(arr: np.ndarray, path, dtype: str) -> None:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array")
    n, d = arr.shape
    rec = np.empty((n, d + 1), dtype=dtype)
    rec.view("<i4")[:, 0] = d
    rec[:, 1:] = arr
    with open(path, "wb") as f:
        f.write(rec.tobytes())


def _read_vecs(path, dtype: str) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        raise VectorFileError(f"{os.fspath(path)}: empty file")
    if raw.size < 4:
        raise VectorFileError(f"{os.fspath(path)}: truncated header at byte 0")
    d = int(raw[:4].view("<i4")[0])
    if d <= 0:
        raise VectorFileError(f"{os.fspath(path)}: bad dimension {d} at byte 0")
    rec_bytes = 4 * (d + 1)
    n, rem = divmod(raw.size, rec_bytes)
    dims = raw[: n * rec_bytes].view("<i4").reshape(n, d + 1)[:, 0] if n else np.empty(0, np.int32)
    bad = np.flatnonzero(dims != d)
    if bad.size:
        i = int(bad[0])
        raise VectorFileError(
            f"{os.fspath(path)}: record {i} at byte {i * rec_bytes} has dimension "
            f"{int(dims[i])}, expected {d}")
    if rem:
        raise VectorFileError(
            f"{os.fspath(path)}: truncated record {n} at byte {n * rec_bytes}")
    return raw.view(dtype).reshape(n, d + 1)[:, 1:].copy()


def save_vectors(data, path) -> None:
    """Write rows as fvecs: per row an int32 dimension then float32 values."""
    rows = data.rows if isinstance(data, DataMatrix) else np.asarray(data)
    _write_vecs(rows.astype("<f4"), path, "<f4")


def load_raw_vectors(path) -> np.ndarray:
    return _read_vecs(path, "<f4")


def load_vectors(path) -> DataMatrix:
    return DataMatrix(load_raw_vectors(path))


def save_ivecs(arr, path) -> None:
    _write_vecs(np.asarray(arr, dtype="<i4"), path, "<i4")


def load_ivecs(path) -> np.ndarray:
    return _read_vecs(path, "<i4")


# -- ground truth ---------------------------------------------------------------

@dataclass
class GroundTruth:
    ids: np.ndarray        # (num_queries, k) int
    distances: np.ndarray  # (num_queries, k) float64, ascending

    @property
    def k(self) -> int:
        return self.ids.shape[1]

    def pairs(self, i: int) -> list[tuple[int, float]]:
        return list(zip(self.ids[i].tolist(), self.distances[i].tolist()))

    def save(self, ids_path, dist_path) -> None:
        save_ivecs(self.ids, ids_path)
        _write_vecs(self.distances.astype("<f4"), dist_path, "<f4")

    @classmethod
    def load(cls, ids_path, dist_path) -> "GroundTruth":
        ids = load_ivecs(ids_path).astype(np.int64)
        dist = load_raw_vectors(dist_path).astype(np.float64)
        if ids.shape != dist.shape:
            raise VectorFileError("ground-truth id and distance files disagree in shape")
        return cls(ids, dist)


_MARGIN = 32


def brute_force_knn(data: DataMatrix, queries, k: int, batch: int = 256) -> GroundTruth:
    """Exact k nearest neighbours by linear scan; ties go to the lower id.

    Candidates are shortlisted with the dot-product form of the distance and
    the shortlist is re-ranked with direct Euclidean distances.
    """
    n = len(data)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in 1..{n}")
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if Q.shape[1] != data.dim:
        raise ValueError(f"queries have dimension {Q.shape[1]}, data {data.dim}")
    X = data.rows
    X64 = X.astype(np.float64)
    sq = np.einsum("ij,ij->i", X64, X64)
    m = min(n, k + _MARGIN)
    out_ids = np.empty((Q.shape[0], k), dtype=np.int64)
    out_d = np.empty((Q.shape[0], k), dtype=np.float64)
    for s in range(0, Q.shape[0], batch):
        qb = Q[s:s + batch]
        approx = sq[None, :] - 2.0 * (qb @ X64.T)
        if m < n:
            short = np.argpartition(approx, m - 1, axis=1)[:, :m]
        else:
            short = np.broadcast_to(np.arange(n), (qb.shape[0], n))
        for r in range(qb.shape[0]):
            cand = np.sort(short[r])
            diff = X64[cand] - qb[r]
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            order = np.lexsort((cand, dist))[:k]
            out_ids[s + r] = cand[order]
            out_d[s + r] = dist[order]
    return GroundTruth(out_ids, out_d)


def recall(found_ids, true_ids) -> float:
    true = set(np.asarray(true_ids).tolist())
    if not true:
        raise ValueError("empty ground truth")
    return len(true.intersection(np.asarray(found_ids).tolist())) / len(true)
