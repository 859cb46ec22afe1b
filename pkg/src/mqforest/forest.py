"""RP-Forest and MQ-Forest query engines over one shared set of trees.

Both modes walk the trees in order, pool the unseen ids of each leaf, and
re-rank them by distance to the query ``q`` in a :class:`CandidateQueue`.
RP mode routes every tree with ``q``.  MQ mode routes the first ``v`` trees
with ``q`` and each later tree with the normalised centroid of the current
candidates, re-estimated after every tree.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .candidates import CandidateQueue
from .core import DataMatrix, DimensionMismatchError, as_vector, distances_to
from .hashing import HyperplaneHash, spawn_rngs
from .rp_tree import Internal, Leaf, Node, RPTree, build_tree

DEFAULT_NS = 500
DEFAULT_V = 8
MAGIC = b"MQF1"


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[RPTree, ...]
    data: DataMatrix
    n_s: int
    seed: int

    def __len__(self) -> int:
        return len(self.trees)

    @property
    def dim(self) -> int:
        return self.data.dim

    def head(self, t: int) -> "Forest":
        """The forest made of the first ``t`` trees.

        Tree ``i`` depends only on ``(seed, i)``, so this equals
        ``build_forest(data, t, n_s, seed)``.
        """
        if not 1 <= t <= len(self.trees):
            raise ValueError(f"tree count {t} outside 1..{len(self.trees)}")
        return Forest(self.trees[:t], self.data, self.n_s, self.seed)


@dataclass
class QueryResult:
    neighbours: list[tuple[int, float]]
    distance_computations: int
    per_tree_delta_knn: list[int]
    visited: int
    s_updates: int = 0
    routing: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def ids(self) -> list[int]:
        return [i for i, _ in self.neighbours]


def build_forest(data: DataMatrix, T: int, n_s: int = DEFAULT_NS, seed: int = 0) -> Forest:
    if T < 1:
        raise ValueError("a forest needs at least one tree")
    if data is None or len(data) == 0:
        raise ValueError("cannot build a forest over an empty dataset")
    all_ids = np.arange(len(data), dtype=np.int64)
    trees = tuple(
        RPTree(build_tree(data, all_ids, n_s, rng).root, n_s=n_s, dim=data.dim, seed=(seed, i))
        for i, rng in enumerate(spawn_rngs(seed, T))
    )
    return Forest(trees, data, n_s, seed)


def _search(forest: Forest, q, k: int, v: int, record_routing: bool = False) -> QueryResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    q = as_vector(q)
    if q.shape[0] != forest.dim:
        raise DimensionMismatchError(f"query has dimension {q.shape[0]}, forest {forest.dim}")
    T = len(forest.trees)
    rows = forest.data.rows
    seen = np.zeros(len(forest.data), dtype=bool)
    queue = CandidateQueue(q, k, track_sum=False)
    deltas: list[int] = []
    routing: list[np.ndarray] = []
    visited = 0

    for i, tree in enumerate(forest.trees):
        if i < v or len(queue) == 0:
            u = q
        else:
            queue.start_tracking()
            u = queue.current_estimate()
        if record_routing:
            routing.append(u)
        leaf = tree.route(u)
        fresh = leaf[~seen[leaf]]
        seen[fresh] = True
        visited += fresh.size
        if fresh.size:
            vecs = rows[fresh].astype(np.float64)
            stats = queue.merge(fresh, vecs, distances_to(vecs, q))
            deltas.append(stats.inserted)
        else:
            deltas.append(0)

    s_updates = queue.ops_count
    return QueryResult(
        neighbours=queue.top_k(),
        distance_computations=visited + s_updates,
        per_tree_delta_knn=deltas,
        visited=visited,
        s_updates=s_updates,
        routing=routing if record_routing else None,
    )


def query_rp(forest: Forest, q, k: int, record_routing: bool = False) -> QueryResult:
    return _search(forest, q, k, v=len(forest.trees), record_routing=record_routing)


def query_mq(forest: Forest, q, k: int, v: int = DEFAULT_V, record_routing: bool = False) -> QueryResult:
    if not 1 <= v <= len(forest.trees):
        raise ValueError(f"warm-up count v={v} outside 1..{len(forest.trees)}")
    return _search(forest, q, k, v=v, record_routing=record_routing)


# -- serialisation ---------------------------------------------------------

_HEADER = struct.Struct("<4sIQIIq")


def _write_node(f: BinaryIO, node: Node) -> None:
    stack = [node]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            f.write(b"\x01")
            f.write(struct.pack("<I", node.ids.shape[0]))
            f.write(np.asarray(node.ids, dtype="<i4").tobytes())
        else:
            f.write(b"\x00")
            f.write(np.asarray(node.split.w, dtype="<f8").tobytes())
            f.write(struct.pack("<d", node.split.a))
            stack.append(node.right)
            stack.append(node.left)


def dumps_forest(forest: Forest) -> bytes:
    import io

    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, forest.dim, len(forest.data), len(forest.trees),
                           forest.n_s, int(forest.seed)))
    for tree in forest.trees:
        _write_node(buf, tree.root)
    return buf.getvalue()


def save_forest(forest: Forest, path: str | os.PathLike) -> None:
    with open(path, "wb") as f:
        f.write(dumps_forest(forest))


def _read_node(buf: memoryview, pos: int, dim: int, n: int) -> tuple[Node, int]:
    tag = buf[pos]
    pos += 1
    if tag == 1:
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        ids = np.frombuffer(buf, dtype="<i4", count=count, offset=pos).astype(np.int32)
        if count and (ids.min() < 0 or ids.max() >= n):
            raise ValueError(f"leaf id out of range at byte {pos}")
        return Leaf(ids), pos + 4 * count
    if tag != 0:
        raise ValueError(f"bad node tag {tag} at byte {pos - 1}")
    w = np.frombuffer(buf, dtype="<f8", count=dim, offset=pos).astype(np.float64)
    pos += 8 * dim
    (a,) = struct.unpack_from("<d", buf, pos)
    pos += 8
    left, pos = _read_node(buf, pos, dim, n)
    right, pos = _read_node(buf, pos, dim, n)
    return Internal(HyperplaneHash(w, a), left, right), pos


def loads_forest(blob: bytes, data: DataMatrix) -> Forest:
    if len(blob) < _HEADER.size:
        raise ValueError("truncated forest header")
    magic, dim, n, T, n_s, seed = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if dim != data.dim or n != len(data):
        raise ValueError(f"forest is for {n} x {dim} data, got {len(data)} x {data.dim}")
    buf = memoryview(blob)
    pos = _HEADER.size
    trees = []
    try:
        for i in range(T):
            root, pos = _read_node(buf, pos, dim, n)
            trees.append(RPTree(root, n_s=n_s, dim=dim, seed=(seed, i)))
    except (struct.error, ValueError, IndexError) as exc:
        raise ValueError(f"corrupt forest file near byte {pos}: {exc}") from exc
    if pos != len(blob):
        raise ValueError(f"{len(blob) - pos} trailing bytes after the last tree")
    return Forest(tuple(trees), data, n_s, seed)


def load_forest(path: str | os.PathLike, data: DataMatrix) -> Forest:
    with open(path, "rb") as f:
        return loads_forest(f.read(), data)
