"""Bounded candidate queue with an incrementally maintained member sum.

The queue keeps the ``k`` points closest to the original query seen so far.
Alongside the heap it keeps ``s``, the sum of the member vectors, so that the
normalised centroid of the members costs one division instead of ``k``
additions.  Every change to ``s`` is tallied in :attr:`ops_count`.  Tracking can be
deferred (``track_sum=False``) until the first estimate is needed.
"""
from __future__ import annotations

import heapq
from typing import NamedTuple

import numpy as np

from .core import DegenerateVectorError, DimensionMismatchError, as_vector, distances_to

# s is rebuilt from the member vectors after this many merges
RESUM_EVERY = 64


class MergeStats(NamedTuple):
    inserted: int
    evicted: int


class CandidateQueue:
    def __init__(self, q, k: int, track_sum: bool = True):
        if k < 1:
            raise ValueError("queue capacity k must be >= 1")
        self.q = as_vector(q)
        self.k = int(k)
        # max-heap on distance via negation; ties put the larger id on top
        self._heap: list[tuple[float, int]] = []
        self._vectors: dict[int, np.ndarray] = {}
        self._s = np.zeros(self.q.shape[0], dtype=np.float64)
        self.tracking = bool(track_sum)
        self.ops_count = 0
        self.merges = 0

    def __len__(self) -> int:
        return len(self._heap)

    def __contains__(self, pid: int) -> bool:
        return pid in self._vectors

    @property
    def s(self) -> np.ndarray:
        return self._s.copy()

    @property
    def ids(self) -> set[int]:
        return set(self._vectors)

    def start_tracking(self) -> int:
        """Begin maintaining ``s``; costs one addition per current member."""
        if self.tracking:
            return 0
        self.tracking = True
        self.resum()
        self.ops_count += len(self._vectors)
        return len(self._vectors)

    def worst_distance(self) -> float:
        return -self._heap[0][0] if self._heap else np.inf

    def merge(self, ids, vectors, dists=None) -> MergeStats:
        """Offer newly retrieved points; keep the ``k`` closest to ``q``.

        ``dists`` may carry precomputed distances to ``q``.  Follows the fill
        then replace loops of the incremental centroid update: points are taken
        closest-first, and a member is evicted only when strictly further than
        the incoming point.
        """
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size == 0:
            return MergeStats(0, 0)
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != ids.size:
            raise ValueError("ids and vectors disagree in length")
        if vectors.shape[1] != self.q.shape[0]:
            raise DimensionMismatchError(
                f"expected dimension {self.q.shape[0]}, got {vectors.shape[1]}")
        if np.unique(ids).size != ids.size:
            raise ValueError("duplicate ids within the offered batch")
        for pid in ids.tolist():
            if pid in self._vectors:
                raise ValueError(f"id {pid} is already in the queue")

        if dists is None:
            dists = distances_to(vectors, self.q)
        else:
            dists = np.asarray(dists, dtype=np.float64)
        order = np.lexsort((ids, dists))

        heap = self._heap
        inserted = evicted = 0
        pos = 0
        n = order.size
        while len(heap) < self.k and pos < n:
            j = order[pos]
            self._push(float(dists[j]), int(ids[j]), vectors[j])
            inserted += 1
            pos += 1
        while pos < n:
            j = order[pos]
            dz = float(dists[j])
            if not -heap[0][0] > dz:
                break
            _, neg_id = heapq.heappop(heap)
            gone = self._vectors.pop(-neg_id)
            if self.tracking:
                self._s -= gone
            evicted += 1
            self._push(dz, int(ids[j]), vectors[j])
            inserted += 1
            pos += 1

        if self.tracking:
            self.ops_count += inserted + evicted
            self.merges += 1
            if self.merges % RESUM_EVERY == 0:
                self.resum()
        return MergeStats(inserted, evicted)

    def _push(self, dist: float, pid: int, vec: np.ndarray) -> None:
        heapq.heappush(self._heap, (-dist, -pid))
        vec = vec.copy()
        self._vectors[pid] = vec
        if self.tracking:
            self._s += vec

    def resum(self) -> None:
        """Recompute ``s`` from scratch to discard accumulated rounding."""
        s = np.zeros_like(self._s)
        for pid in sorted(self._vectors):
            s += self._vectors[pid]
        self._s = s

    def drift(self) -> float:
        """Max-norm gap between ``s`` and a fresh sum of the members."""
        if not self._vectors:
            return float(np.max(np.abs(self._s))) if self._s.size else 0.0
        fresh = np.sum([self._vectors[p] for p in sorted(self._vectors)], axis=0)
        return float(np.max(np.abs(self._s - fresh)))

    def current_estimate(self) -> np.ndarray:
        """Unit-norm centroid of the current members, ``s / ||s||``."""
        if not self._heap:
            raise ValueError("empty queue has no centroid")
        if not self.tracking:
            raise ValueError("member sum is not being tracked; call start_tracking()")
        n = np.linalg.norm(self._s)
        if n == 0.0:
            raise DegenerateVectorError("member sum is the zero vector")
        return self._s / n

    def top_k(self) -> list[tuple[int, float]]:
        """Members as ``(id, distance)`` sorted by distance, then id."""
        return sorted(((-nid, -nd) for nd, nid in self._heap), key=lambda t: (t[1], t[0]))


def new_queue(q, k: int) -> CandidateQueue:
    return CandidateQueue(q, k)


def merge_candidates(queue: CandidateQueue, ids, vectors, dists=None) -> MergeStats:
    return queue.merge(ids, vectors, dists)


def current_estimate(queue: CandidateQueue) -> np.ndarray:
    return queue.current_estimate()


def top_k(queue: CandidateQueue) -> list[tuple[int, float]]:
    return queue.top_k()
