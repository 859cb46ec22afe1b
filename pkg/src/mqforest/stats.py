"""Collision statistics for hyperplane hashes and the centroid estimate.

Covers average collision probability (closed form and Monte Carlo), the
Gaussian model of neighbour heights ``A w`` given ``u . w = b``, centroid
optimality checks, hash-output covariance, the chi model of ``||q - c||``,
the superiority probability of the estimated centroid and the kappa quality
ratio.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (DataMatrix, DegenerateVectorError, DimensionMismatchError,
                   as_unit_vector, as_vector, l2_normalize)
from .data import GroundTruth, brute_force_knn
from .hashing import charikar_collision_probability, make_rng
from .special import chi_cdf, chi_mean, ks_1samp, ks_2samp, regularized_incomplete_beta

log = logging.getLogger(__name__)

MAX_REJECTION_DRAWS = 10**7


def _rows(x) -> np.ndarray:
    if isinstance(x, DataMatrix):
        return x.rows.astype(np.float64)
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValueError("expected a non-empty set of vectors")
    return a


def _check_dim(A: np.ndarray, u: np.ndarray) -> None:
    if A.shape[1] != u.shape[0]:
        raise DimensionMismatchError(f"vectors have dimension {A.shape[1]}, u has {u.shape[0]}")


# -- conditional Gaussian model -------------------------------------------

@dataclass(frozen=True)
class CollisionMoments:
    mean: np.ndarray  # (k,)  b * (x_i . u)
    cov: np.ndarray   # (k, k) x_i . x_j - (x_i . u)(x_j . u)


def conditional_plane_moments(A, u, b: float) -> CollisionMoments:
    """Mean and covariance of ``A w`` for ``w ~ N(0, I)`` given ``u . w = b``."""
    A = _rows(A)
    u = as_unit_vector(u)
    _check_dim(A, u)
    p = A @ u
    cov = A @ A.T - np.outer(p, p)
    return CollisionMoments(mean=float(b) * p, cov=0.5 * (cov + cov.T))


def sample_conditioned_planes(u, b: float, n: int, rng=None) -> np.ndarray:
    """Exact draws of ``w ~ N(0, I)`` conditioned on ``u . w = b``.

    Uses ``w = b u + (I - u u^T) g`` with ``g`` standard normal.
    """
    u = as_unit_vector(u)
    g = make_rng(rng).standard_normal((int(n), u.shape[0]))
    return float(b) * u + g - np.outer(g @ u, u)


# -- average collision probability -----------------------------------------

@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float


def acp_closed_form(u, knn) -> float:
    """Average zero-offset collision probability of ``u`` with each neighbour."""
    A = _rows(knn)
    u = as_vector(u)
    _check_dim(A, u)
    dists = np.clip(np.linalg.norm(A - u, axis=1), 0.0, 2.0)
    return float(np.mean([charikar_collision_probability(float(t)) for t in dists]))


def acp_monte_carlo(u, knn, family: str = "charikar", trials: int = 10_000,
                    reference=None, rng=None, batch: int = 512) -> MonteCarloEstimate:
    """Empirical average collision probability with its standard error.

    Each trial draws one hash function and records the fraction of ``knn``
    whose bit equals the bit of ``u``.  For the ``rp`` family the offset is
    uniform between the extreme projections of ``reference`` (normally the
    full dataset).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    A = _rows(knn)
    u = as_vector(u)
    _check_dim(A, u)
    if family == "rp":
        if reference is None:
            raise ValueError("the rp family needs reference points to bound its offset")
        R = _rows(reference)
        _check_dim(R, u)
    elif family != "charikar":
        raise ValueError(f"unknown hash family {family!r}")
    rng = make_rng(rng)
    d = u.shape[0]
    fracs = np.empty(trials)
    done = 0
    while done < trials:
        n = min(batch, trials - done)
        W = rng.standard_normal((n, d))
        if family == "rp":
            P = R @ W.T
            a = rng.uniform(P.min(axis=0), P.max(axis=0))
        else:
            a = np.zeros(n)
        bits_knn = (A @ W.T) > a
        bit_u = (W @ u) > a
        fracs[done:done + n] = np.mean(bits_knn == bit_u, axis=0)
        done += n
    se = float(fracs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return MonteCarloEstimate(float(fracs.mean()), se)


# -- centroid optimality ----------------------------------------------------

@dataclass(frozen=True)
class OptimalityReport:
    mean_sums: np.ndarray
    traces: np.ndarray
    centroid_index: int
    b: float
    mean_optimal: bool
    trace_optimal: bool

    @property
    def optimal(self) -> bool:
        return self.mean_optimal and self.trace_optimal


def centroid_optimality_check(knn, candidates, b: float = 1.0, tol: float = 1e-12) -> OptimalityReport:
    """Score every candidate ``u`` by the sum of conditional means and the
    covariance trace, and report whether the centroid wins both.

    The conditional model needs ``|u| = 1``, so candidates are compared by
    direction: each is normalised first, and the centroid is the candidate
    pointing along the neighbour mean.  For ``b > 0`` the centroid should hold
    the largest mean sum, for ``b < 0`` the smallest.
    """
    A = _rows(knn)
    U = _rows(candidates)
    _check_dim(A, U[0])
    if b == 0:
        raise ValueError("b must be non-zero")
    U = np.stack([l2_normalize(v) for v in U])
    c = l2_normalize(A.mean(axis=0))
    hits = np.flatnonzero(np.linalg.norm(U - c, axis=1) < 1e-9)
    if hits.size == 0:
        raise ValueError("candidates must include the centroid of knn")
    ci = int(hits[0])
    P = A @ U.T                      # (k, candidates)
    mean_sums = b * P.sum(axis=0)
    traces = np.sum(1.0 - P * P, axis=0)
    scale = max(1.0, float(np.max(np.abs(mean_sums))))
    if b > 0:
        mean_ok = mean_sums[ci] >= mean_sums.max() - tol * scale
    else:
        mean_ok = mean_sums[ci] <= mean_sums.min() + tol * scale
    trace_ok = traces[ci] <= traces.min() + tol * max(1.0, float(traces.max()))
    return OptimalityReport(mean_sums, traces, ci, float(b), bool(mean_ok), bool(trace_ok))


def offdiag_identity(knn, u) -> tuple[float, float]:
    """Both sides of ``sum_{i != j} p_i p_j = (sum p)^2 - sum p^2`` with ``p = A u``."""
    A = _rows(knn)
    u = as_vector(u)
    _check_dim(A, u)
    p = A @ u
    outer = np.outer(p, p)
    lhs = float(outer.sum() - np.trace(outer))
    rhs = float(p.sum() ** 2 - np.dot(p, p))
    return lhs, rhs


@dataclass(frozen=True)
class HashCovariance:
    cov: np.ndarray        # (k, k) column covariance of the heights
    offdiag: np.ndarray    # upper-triangle entries, row-major
    draws: int             # planes drawn before enough were accepted

    @property
    def mean_offdiag(self) -> float:
        return float(self.offdiag.mean()) if self.offdiag.size else 0.0


def empirical_hash_covariance(knn, u, num_planes: int = 1000, b_tol: float = 0.005,
                              rng=None, max_draws: int = MAX_REJECTION_DRAWS) -> HashCovariance:
    """Covariance of neighbour heights ``A w`` over planes with ``|u . w| < b_tol``.

    Planes are rejection sampled.  Because ``u . w`` is independent of the
    component of ``w`` orthogonal to ``u``, the test statistic is drawn first
    and the orthogonal part only for accepted draws; the accepted planes have
    exactly the distribution of full rejection sampling.
    """
    A = _rows(knn)
    u = as_unit_vector(u)
    _check_dim(A, u)
    if num_planes < 2 or b_tol <= 0:
        raise ValueError("need num_planes >= 2 and a positive tolerance")
    rng = make_rng(rng)
    accepted: list[float] = []
    draws = 0
    chunk = max(4096, int(4 * num_planes / max(b_tol, 1e-6)))
    while len(accepted) < num_planes:
        if draws >= max_draws:
            raise RuntimeError(
                f"accepted {len(accepted)} of {num_planes} planes within {max_draws} draws")
        n = min(chunk, max_draws - draws)
        t = rng.standard_normal(n)
        ok = np.flatnonzero(np.abs(t) < b_tol)
        need = num_planes - len(accepted)
        if ok.size >= need:
            draws += int(ok[need - 1]) + 1
            accepted.extend(t[ok[:need]].tolist())
        else:
            draws += n
            accepted.extend(t[ok].tolist())
    W = sample_conditioned_planes(u, 0.0, num_planes, rng) + np.outer(accepted, u)
    D = W @ A.T                       # (planes, k)
    cov = np.atleast_2d(np.cov(D, rowvar=False))
    iu = np.triu_indices(cov.shape[0], 1)
    return HashCovariance(cov, cov[iu], draws)


# -- chi model and superiority ----------------------------------------------

@dataclass(frozen=True)
class ChiFit:
    sigma_hat: float
    ks_statistic: float
    p_value: float


def chi_fit(distances, m: int) -> ChiFit:
    """Fit ``sigma * chi_m`` by matching the mean, then KS-test the fit."""
    x = np.asarray(distances, dtype=np.float64).ravel()
    if x.size < 30:
        raise ValueError("need at least 30 samples")
    if m < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("distances must be positive and finite")
    sigma = float(x.mean() / chi_mean(m))
    stat, p = ks_1samp(x, lambda z: chi_cdf(z, m, sigma))
    return ChiFit(sigma, stat, p)


@dataclass(frozen=True)
class SuperiorityParams:
    m: int
    r_ratio: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if not 0.0 < self.r_ratio < 1.0:
            raise ValueError(f"r_ratio={self.r_ratio} outside (0, 1)")


def superiority_probability(m, r_ratio: float | None = None) -> float:
    """Probability that the estimated centroid is further from ``c`` than ``q`` is.

    ``1 - I_{1/(2 - r)}(m/2, m/2)`` where ``r = r1 / r2`` is the ratio of the
    neighbourhood radii.  Accepts a :class:`SuperiorityParams` or ``(m, r_ratio)``.
    """
    params = m if isinstance(m, SuperiorityParams) else SuperiorityParams(m, r_ratio)
    x = 1.0 / (2.0 - params.r_ratio)
    # equal shapes, so 1 - I_x(a, a) = I_{1-x}(a, a) without cancellation
    return regularized_incomplete_beta(1.0 - x, params.m / 2.0, params.m / 2.0)


def superiority_monte_carlo(m: int, r_ratio: float, draws: int = 10**7, rng=None,
                            batch: int = 10**6) -> MonteCarloEstimate:
    """Monte-Carlo estimate of the same probability via ``sqrt((1 - r) F_{m,m}) > 1``."""
    SuperiorityParams(m, r_ratio)
    rng = make_rng(rng)
    hits = 0
    left = int(draws)
    while left > 0:
        n = min(batch, left)
        f = rng.f(m, m, size=n)
        hits += int(np.count_nonzero(np.sqrt((1.0 - r_ratio) * f) > 1.0))
        left -= n
    p = hits / draws
    return MonteCarloEstimate(p, math.sqrt(max(p * (1 - p), 1.0 / draws) / draws))


@dataclass(frozen=True)
class KappaSample:
    m: int
    kappa: float

    def __post_init__(self):
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa must be finite and non-negative")


def kappa(q, c_norm, c_hat_norm) -> float:
    """``||<c> - <c_hat>|| / ||<c> - q||``; below 1 the estimate beats ``q``."""
    q, c, ch = as_vector(q), as_vector(c_norm), as_vector(c_hat_norm)
    if not q.shape == c.shape == ch.shape:
        raise DimensionMismatchError("q, <c> and <c_hat> must share a dimension")
    den = float(np.linalg.norm(c - q))
    if den == 0.0:
        raise DegenerateVectorError("degenerate query: q coincides with <c>")
    return float(np.linalg.norm(c - ch)) / den


# -- centroid sampling experiment -------------------------------------------

@dataclass(frozen=True)
class CltReport:
    c_minus_mu: np.ndarray      # per query, the tracked coordinate
    chat_minus_mu: np.ndarray
    chat_minus_c: np.ndarray
    scaled_c_minus_mu: np.ndarray  # (r2 / r1) * (c - mu)
    ks_statistic: float
    ks_p_value: float
    violations: int             # queries with ||c - c_hat|| > ||c - q||
    coordinate: int

    @property
    def var_c_minus_mu(self) -> float:
        return float(np.var(self.c_minus_mu, ddof=1))

    @property
    def var_chat_minus_c(self) -> float:
        return float(np.var(self.chat_minus_c, ddof=1))


def clt_coordinate_experiment(data: DataMatrix, queries, k: int, r: int, rng=None,
                              coordinate: int = 0,
                              ground_truth: GroundTruth | None = None) -> CltReport:
    """Compare the exact neighbour centroid with a centroid of ``k`` points
    sampled from the ``r`` nearest, in coordinates centred on each query.

    ``c`` averages the k nearest neighbours, ``c_hat`` averages a uniform
    ``k``-subset of the ``r`` nearest.  ``r1`` and ``r2`` are the largest
    distances to ``q`` within each set.  The KS test checks that
    ``(r2/r1)(c - mu)`` and ``c_hat - mu`` share a distribution.
    """
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if not 1 <= k < r:
        raise ValueError("need 1 <= k < r")
    if r > len(data):
        raise ValueError(f"r={r} exceeds the {len(data)} data points")
    if not 0 <= coordinate < data.dim:
        raise ValueError(f"coordinate {coordinate} outside 0..{data.dim - 1}")
    if ground_truth is None or ground_truth.k < r:
        ground_truth = brute_force_knn(data, Q, r)
    rng = make_rng(rng)
    X = data.rows
    n = Q.shape[0]
    cm, chm, dcc, scaled = (np.empty(n) for _ in range(4))
    violations = 0
    for i in range(n):
        S = X[ground_truth.ids[i, :r]].astype(np.float64) - Q[i]
        knn = S[:k]
        Y = S[rng.choice(r, size=k, replace=False)]
        c, ch = knn.mean(axis=0), Y.mean(axis=0)
        r1 = float(np.linalg.norm(knn, axis=1).max())
        r2 = float(np.linalg.norm(Y, axis=1).max())
        cm[i], chm[i], dcc[i] = c[coordinate], ch[coordinate], ch[coordinate] - c[coordinate]
        scaled[i] = (r2 / r1) * c[coordinate]
        violations += bool(np.linalg.norm(c - ch) > np.linalg.norm(c))
    stat, p = ks_2samp(scaled, chm)
    return CltReport(cm, chm, dcc, scaled, stat, p, violations, coordinate)


def projection_extremes(data: DataMatrix, num_planes: int = 100, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Largest and smallest projection of the data onto random Gaussian planes.

    A diagnostic for the symmetry ``max(X w) ~ -min(X w)`` that lets the
    offset be ignored; results go to the log, nothing is asserted.
    """
    rng = make_rng(rng)
    W = rng.standard_normal((num_planes, data.dim))
    P = data.rows.astype(np.float64) @ W.T
    hi, lo = P.max(axis=0), P.min(axis=0)
    log.info("projection extremes: mean max %.4f, mean min %.4f, mean |max + min| %.4f",
             hi.mean(), lo.mean(), np.abs(hi + lo).mean())
    return hi, lo
