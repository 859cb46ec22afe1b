"""Binary hyperplane hash families.

Two families are supported:

* ``rp``: the RP-Tree split ``w . x > a`` with ``a`` drawn uniformly between
  the extreme projections of some reference point set;
* ``charikar``: the same predicate with ``a = 0``.

``w`` is always a raw standard-Gaussian draw and is never normalised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .core import DimensionMismatchError, as_vector

Family = Literal["rp", "charikar"]


def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator.  Accepts an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_rngs(seed, n: int) -> list[np.random.Generator]:
    """``n`` independent child streams derived from ``seed``.

    Child ``i`` depends only on ``(seed, i)``, so a prefix of the list is the
    same whatever ``n`` is.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (i,)))
            for i in range(n)]


@dataclass(frozen=True, eq=False)
class HyperplaneHash:
    w: np.ndarray
    a: float = 0.0

    def __post_init__(self):
        w = as_vector(self.w)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        a = float(self.a)
        if not math.isfinite(a):
            raise ValueError("offset must be finite")
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def __call__(self, x) -> int:
        return hash_bit(self, x)

    def bits(self, rows: np.ndarray) -> np.ndarray:
        """Vectorised hash of each row of a 2-d array."""
        rows = np.asarray(rows)
        if rows.shape[-1] != self.dim:
            raise DimensionMismatchError(f"expected dimension {self.dim}, got {rows.shape[-1]}")
        return (rows @ self.w > self.a).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class CompoundHash:
    functions: tuple[HyperplaneHash, ...]

    def __post_init__(self):
        fs = tuple(self.functions)
        if not fs:
            raise ValueError("a compound hash needs at least one function")
        if len({h.dim for h in fs}) != 1:
            raise DimensionMismatchError("constituent hyperplanes differ in dimension")
        object.__setattr__(self, "functions", fs)

    def __len__(self) -> int:
        return len(self.functions)

    @property
    def dim(self) -> int:
        return self.functions[0].dim

    def __call__(self, x) -> str:
        return compound_code(self, x)


def sample_hyperplane(d: int, rng) -> np.ndarray:
    if d < 2:
        raise ValueError("dimension must be >= 2")
    return make_rng(rng).standard_normal(d)


def sample_offset(projections: Sequence[float], rng) -> float:
    """Uniform draw between the smallest and largest projection."""
    p = np.asarray(projections, dtype=np.float64)
    if p.size == 0:
        raise ValueError("no projections to bound the offset")
    lo, hi = float(p.min()), float(p.max())
    if lo == hi:
        return lo
    return float(make_rng(rng).uniform(lo, hi))


def sample_hash(d: int, rng, family: Family = "rp", reference: np.ndarray | None = None) -> HyperplaneHash:
    """Draw one function from ``family``.

    For the ``rp`` family the offset is bounded by the projections of the
    ``reference`` rows onto ``w`` (typically the whole dataset).
    """
    rng = make_rng(rng)
    w = sample_hyperplane(d, rng)
    if family == "charikar":
        return HyperplaneHash(w, 0.0)
    if family != "rp":
        raise ValueError(f"unknown hash family {family!r}")
    if reference is None:
        raise ValueError("the rp family needs reference points to bound its offset")
    return HyperplaneHash(w, sample_offset(np.asarray(reference) @ w, rng))


def sample_compound(d: int, m: int, rng, family: Family = "charikar",
                    reference: np.ndarray | None = None) -> CompoundHash:
    rng = make_rng(rng)
    return CompoundHash(tuple(sample_hash(d, rng, family, reference) for _ in range(m)))


def hash_bit(h: HyperplaneHash, x) -> int:
    x = as_vector(x)
    if x.shape[0] != h.dim:
        raise DimensionMismatchError(f"expected dimension {h.dim}, got {x.shape[0]}")
    # ties go to 0
    return int(float(h.w @ x) > h.a)


def compound_code(c: CompoundHash, x) -> str:
    return "".join(str(hash_bit(h, x)) for h in c.functions)


def charikar_collision_probability(dist: float) -> float:
    """Collision probability of two unit vectors under the zero-offset family.

    ``1 - theta/pi`` with ``cos(theta) = 1 - dist**2 / 2``.
    """
    if not 0.0 <= dist <= 2.0:
        raise ValueError(f"distance {dist} outside [0, 2]")
    cos_theta = min(1.0, max(-1.0, 1.0 - dist * dist / 2.0))
    return 1.0 - math.acos(cos_theta) / math.pi
