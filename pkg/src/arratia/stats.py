"""Kolmogorov-Smirnov and binomial checks with explicit discretisation allowances.

Discretised simulations report values that are biased in a known direction.
When the true value X of a reported value x satisfies ``x + lo <= X <= x + hi``,
the empirical CDF of x is sandwiched between ``F(. + lo)`` and ``F(. + hi)``;
the statistics below measure only the excess outside that band, so a zero
band gives the ordinary KS statistic.
"""
from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats


class KSResult(NamedTuple):
    statistic: float
    pvalue: float
    n: float


def ks_critical(n: float, level: float = 0.01) -> float:
    """Two-sided one-sample KS critical value at significance ``level``."""
    return float(stats.kstwo.isf(level, int(round(n))))


def ks_one_sample(
    samples,
    cdf: Callable,
    lo: float = 0.0,
    hi: float = 0.0,
    horizon: float | None = None,
) -> KSResult:
    """One-sample KS distance to a continuous ``cdf``.

    With ``horizon`` the comparison is restricted to ``x <= horizon``; samples
    beyond it (including ``inf``) still count in ``n``.  The p-value uses the
    uncensored null law and is conservative under censoring.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    if horizon is not None:
        x = x[x <= horizon]
    k = x.size
    i = np.arange(1, k + 1)
    d_plus = np.max(i / n - cdf(x + hi)) if k else 0.0
    d_minus = np.max(cdf(x + lo) - (i - 1) / n) if k else 0.0
    if horizon is not None:
        d_minus = max(d_minus, float(cdf(horizon + lo)) - k / n)
    d = max(float(d_plus), float(d_minus), 0.0)
    return KSResult(d, float(stats.kstwo.sf(d, n)), n)


def _ecdf(sorted_x, z):
    return np.searchsorted(sorted_x, z, side="right") / sorted_x.size


def ks_two_sample(x, y, x_band=(0.0, 0.0), y_band=(0.0, 0.0)) -> KSResult:
    """Two-sample KS statistic; ``*_band = (lo, hi)`` bounds each sample's bias."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    (ax, bx), (ay, by) = x_band, y_band
    d1 = np.max(_ecdf(x, x) - _ecdf(y, x + (bx - ay)))
    d2 = np.max(_ecdf(y, y) - _ecdf(x, y + (by - ax)))
    d = max(float(d1), float(d2), 0.0)
    en = x.size * y.size / (x.size + y.size)
    return KSResult(d, float(stats.kstwo.sf(d, int(round(en)))), en)


class BinomialCheck(NamedTuple):
    frequency: float
    expected: float
    se: float
    z: float
    ok: bool


def binomial_check(successes: int, n: int, p: float, k: float = 3.0, allowance: float = 0.0) -> BinomialCheck:
    """Is ``successes / n`` within ``k`` binomial standard errors (plus allowance) of ``p``?"""
    freq = successes / n
    se = math.sqrt(p * (1.0 - p) / n)
    diff = abs(freq - p)
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
    return BinomialCheck(freq, p, se, z, diff <= k * se + allowance)


def two_binomial_check(k1: int, n1: int, k2: int, n2: int, k: float = 3.0) -> BinomialCheck:
    """Compare two independent frequencies with the pooled standard error."""
    p1, p2 = k1 / n1, k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    diff = abs(p1 - p2)
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
    return BinomialCheck(p1, p2, se, z, diff <= k * se)


def mean_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))
