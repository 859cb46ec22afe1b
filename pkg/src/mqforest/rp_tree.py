"""Random projection tree: recursive hyperplane partition with a leaf cap."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .core import DataMatrix, as_vector
from .hashing import HyperplaneHash, make_rng, sample_hyperplane, sample_offset

# extra draws of w before a node whose points cannot be separated becomes a leaf
MAX_REDRAWS = 3
_OFFSET_ATTEMPTS = 64


@dataclass(frozen=True, eq=False)
class Leaf:
    ids: np.ndarray
    stuck: bool = False

    def __len__(self) -> int:
        return self.ids.shape[0]


@dataclass(frozen=True, eq=False)
class Internal:
    split: HyperplaneHash
    left: "Node"
    right: "Node"


Node = Union[Leaf, Internal]


@dataclass(frozen=True, eq=False)
class RPTree:
    root: Node
    n_s: int
    dim: int
    seed: object = None

    def route(self, v) -> np.ndarray:
        return route_to_leaf(self, v)

    def leaves(self) -> Iterator[Leaf]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.append(node.right)
                stack.append(node.left)

    def internal_nodes(self) -> Iterator[Internal]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                yield node
                stack.append(node.right)
                stack.append(node.left)

    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            if isinstance(node, Leaf):
                best = max(best, d)
            else:
                stack.append((node.left, d + 1))
                stack.append((node.right, d + 1))
        return best


def _draw_split(rows: np.ndarray, rng: np.random.Generator):
    """Return (w, a, projections) with both sides non-empty, or None if stuck."""
    d = rows.shape[1]
    for _ in range(1 + MAX_REDRAWS):
        w = sample_hyperplane(d, rng)
        proj = rows @ w
        lo, hi = proj.min(), proj.max()
        if not lo < hi:
            continue
        for _ in range(_OFFSET_ATTEMPTS):
            a = sample_offset(proj, rng)
            if lo < a < hi:
                return w, a, proj
    return None


def build_tree(data: DataMatrix, ids, n_s: int, rng) -> RPTree:
    """Split every node holding more than ``n_s`` points until none remain.

    The points with ``w . x > a`` go left.  ``a`` is uniform strictly inside
    the node's projection range, so neither child is ever empty.
    """
    if n_s < 1:
        raise ValueError("leaf capacity n_s must be >= 1")
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot build a tree over no points")
    seed = rng if not isinstance(rng, np.random.Generator) else None
    rng = make_rng(rng)
    rows = data.rows

    def build(node_ids: np.ndarray) -> Node:
        if node_ids.shape[0] <= n_s:
            return Leaf(node_ids.astype(np.int32))
        drawn = _draw_split(rows[node_ids], rng)
        if drawn is None:
            return Leaf(node_ids.astype(np.int32), stuck=True)
        w, a, proj = drawn
        mask = proj > a
        left = build(node_ids[mask])
        right = build(node_ids[~mask])
        return Internal(HyperplaneHash(w, a), left, right)

    # depth is logarithmic in practice; recursion keeps pre-order rng use simple
    return RPTree(build(ids), n_s=n_s, dim=data.dim, seed=seed)


def route_to_leaf(tree: RPTree, v) -> np.ndarray:
    v = as_vector(v, tree.dim)
    node = tree.root
    while isinstance(node, Internal):
        node = node.left if float(node.split.w @ v) > node.split.a else node.right
    return node.ids
