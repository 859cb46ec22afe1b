"""Vector primitives shared by every other module.

Points live on the unit hypersphere.  Plain ``numpy`` arrays stand in for
vectors; :class:`DataMatrix` wraps a dataset so that row ids stay stable and
the rows are guaranteed to be (approximately) unit norm.
"""
from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-6


class DegenerateVectorError(ValueError):
    """Raised when a vector cannot be normalised (zero norm)."""


class DimensionMismatchError(ValueError):
    pass


def as_vector(v, dim: int | None = None) -> np.ndarray:
    """Coerce ``v`` to a finite 1-d float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {arr.shape[0]}")
    return arr


def as_unit_vector(v, dim: int | None = None) -> np.ndarray:
    arr = as_vector(v, dim)
    if arr.shape[0] < 2:
        raise ValueError("unit vectors need dimension >= 2")
    if abs(np.linalg.norm(arr) - 1.0) > UNIT_TOL:
        raise ValueError("vector is not unit norm")
    return arr


def l2_normalize(v) -> np.ndarray:
    v = as_vector(v)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise DegenerateVectorError("degenerate vector")
    return v / n


def euclidean_distance(x, y) -> float:
    x = as_vector(x)
    y = as_vector(y)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"dimension mismatch: {x.shape[0]} != {y.shape[0]}")
    return float(np.linalg.norm(x - y))


def centroid(points) -> np.ndarray:
    """Coordinate-wise arithmetic mean of a non-empty collection of vectors."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0 or pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("centroid of an empty set")
    return pts.mean(axis=0)


def normalized_centroid(points) -> np.ndarray:
    c = centroid(points)
    try:
        return l2_normalize(c)
    except DegenerateVectorError:
        raise DegenerateVectorError("antipodal degenerate set") from None


def distances_to(rows: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Euclidean distance from every row of ``rows`` to ``v`` in float64."""
    diff = np.asarray(rows, dtype=np.float64) - v
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


class DataMatrix:
    """Immutable N x d matrix of unit-norm rows; row ``i`` is point id ``i``.

    Rows further than 1e-6 from unit norm are re-normalised on ingest and
    counted in :attr:`renormalized`.  Storage may be float32; arithmetic in
    the rest of the package promotes to float64.
    """

    def __init__(self, rows, dtype=np.float32):
        arr = np.array(rows, dtype=dtype, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
        if arr.shape[0] == 0:
            raise ValueError("empty dataset")
        if arr.shape[1] < 2:
            raise ValueError("dimension must be >= 2")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dataset has non-finite entries")

        norms = np.linalg.norm(arr.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise DegenerateVectorError(f"degenerate vector at row {bad}")
        off = np.abs(norms - 1.0) > UNIT_TOL
        self.renormalized = int(off.sum())
        if self.renormalized:
            logger.warning("re-normalised %d of %d rows", self.renormalized, arr.shape[0])
            arr[off] = (arr[off].astype(np.float64) / norms[off, None]).astype(dtype)

        arr.setflags(write=False)
        self._rows = arr

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def count(self) -> int:
        return self._rows.shape[0]

    @property
    def dim(self) -> int:
        return self._rows.shape[1]

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, idx) -> np.ndarray:
        return np.asarray(self._rows[idx], dtype=np.float64)

    def subset(self, ids: Sequence[int] | Iterable[int]) -> "DataMatrix":
        """New matrix of the selected rows, re-indexed from 0."""
        idx = np.fromiter(ids, dtype=np.intp) if not isinstance(ids, np.ndarray) else ids
        return DataMatrix(self._rows[idx], dtype=self._rows.dtype)

    def __repr__(self) -> str:
        return f"DataMatrix(count={self.count}, dim={self.dim}, dtype={self._rows.dtype})"
