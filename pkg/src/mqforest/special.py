"""Special functions and Kolmogorov-Smirnov tests used by the statistics module."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.special import gammainc

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10_000
KS_TERMS = 100


def _beta_cf(x: float, a: float, b: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta fraction did not converge for x={x}, a={a}, b={b}")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) by continued fraction.

    The fraction converges fast for ``x < (a+1)/(a+b+2)``; above that point
    the symmetry ``I_x(a, b) = 1 - I_{1-x}(b, a)`` is used instead.
    """
    x, a, b = float(x), float(a), float(b)
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"shape parameters must be positive and finite, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(x, a, b) / a
    return 1.0 - front * _beta_cf(1.0 - x, b, a) / b


def kolmogorov_sf(lam: float, terms: int = KS_TERMS) -> float:
    """Survival function of the Kolmogorov distribution, P(K > lam)."""
    if lam <= 0.0:
        return 1.0
    j = np.arange(1, terms + 1, dtype=np.float64)
    if lam < 1.18:
        # the alternating series converges slowly here; use the dual theta series for the CDF
        k = (2.0 * j - 1.0) ** 2 * math.pi ** 2 / (8.0 * lam * lam)
        cdf = math.sqrt(2.0 * math.pi) / lam * float(np.sum(np.exp(-k)))
        return min(1.0, max(0.0, 1.0 - cdf))
    total = 2.0 * float(np.sum((-1.0) ** (j - 1) * np.exp(-2.0 * j * j * lam * lam)))
    return min(1.0, max(0.0, total))


def ks_2samp(x, y) -> tuple[float, float]:
    """Two-sided two-sample KS statistic and asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    y = np.sort(np.asarray(y, dtype=np.float64).ravel())
    n, m = x.size, y.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / n
    cdf_y = np.searchsorted(y, pooled, side="right") / m
    stat = float(np.max(np.abs(cdf_x - cdf_y)))
    ne = n * m / (n + m)
    return stat, kolmogorov_sf(math.sqrt(ne) * stat)


def ks_1samp(x, cdf: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """Two-sided one-sample KS statistic against ``cdf`` and asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValueError("sample must be non-empty")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    stat = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return stat, kolmogorov_sf(math.sqrt(n) * stat)


def chi_mean(m: int) -> float:
    """Mean of the chi distribution with ``m`` degrees of freedom."""
    if m < 1:
        raise ValueError("degrees of freedom must be >= 1")
    return math.sqrt(2.0) * math.exp(math.lgamma((m + 1) / 2.0) - math.lgamma(m / 2.0))


def chi_cdf(x, m: int, scale: float = 1.0) -> np.ndarray:
    """CDF of ``scale * chi_m``."""
    if m < 1 or scale <= 0:
        raise ValueError("need m >= 1 and a positive scale")
    z = np.maximum(np.asarray(x, dtype=np.float64) / scale, 0.0)
    return gammainc(m / 2.0, z * z / 2.0)
