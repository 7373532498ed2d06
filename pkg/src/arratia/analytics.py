"""Closed forms and exact samplers for hitting and collision times.

All tail probabilities go through ``scipy.special.erfc`` so that values deep
in the Gaussian tail keep full relative precision.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
ENVELOPE_TMAX = math.exp(-1.0)


def _positive(name, x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be positive and finite, got {x!r}")
    return arr


def _nonnegative(name, x):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative, got {x!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def hitting_time_cdf(a, t):
    """P{theta(a) <= t} for a standard Wiener process started at 0."""
    a = _positive("level a", a)
    t = _positive("time t", t)
    return _out(special.erfc(a / np.sqrt(2.0 * t)))


def cluster_survival(t, r):
    """P{right width of the origin cluster at time t >= r} = P{theta(r/sqrt 2) <= t}.

    Returns exactly 1 at ``r = 0``.
    """
    t = _positive("time t", t)
    r = _nonnegative("width r", r)
    # r = 0 lands on erfc(0) == 1 through the same expression
    return _out(special.erfc((r / SQRT2) / np.sqrt(2.0 * t)))


def darling_limit_cdf(y):
    """P{inf over [0, 2] of a Wiener process started at y stays > 0} = erf(y/2)."""
    y = _nonnegative("y", y)
    return _out(special.erf(y / 2.0))


def mean_cluster_width(t):
    """Expected one-sided width, the integral of ``cluster_survival(t, .)`` over r >= 0."""
    t = _positive("time t", t)
    return _out(2.0 * np.sqrt(t / math.pi))


def _loglog_inv(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0) or np.any(arr >= ENVELOPE_TMAX):
        raise DomainError(f"envelope requires 0 < t < 1/e, got {t!r}")
    return np.log(np.log(1.0 / arr))


def lil_envelope_lower(t):
    """psi(t) = sqrt(2 t ln ln(1/t))."""
    ll = _loglog_inv(t)
    return _out(np.sqrt(2.0 * np.asarray(t, dtype=float) * ll))


def lil_envelope_upper(t):
    """phi(t) = 2 sqrt(t ln ln(1/t))."""
    ll = _loglog_inv(t)
    return _out(2.0 * np.sqrt(np.asarray(t, dtype=float) * ll))


def hitting_time_sample(a, rng: np.random.Generator, size=None):
    """Exact draws of theta(a), using theta(a) = a**2 / Z**2 in law."""
    a = float(_positive("level a", a))
    z = rng.standard_normal(size)
    with np.errstate(divide="ignore"):
        return a * a / (z * z)


def two_particle_collision_sample(gap, rng: np.random.Generator, size=None):
    """Meeting time of two independent Wiener particles ``gap`` apart."""
    gap = float(_positive("gap", gap))
    return hitting_time_sample(gap / SQRT2, rng, size)


# --- envelope event series -------------------------------------------------


def lower_event_probability(t, epsilon):
    """P{right width(t) >= (1 - eps) psi(t)}."""
    return cluster_survival(t, (1.0 - epsilon) * np.asarray(lil_envelope_lower(t)))


def upper_event_probability(t, epsilon):
    """P{right width(t) >= (1 + eps) phi(t)}."""
    return cluster_survival(t, (1.0 + epsilon) * np.asarray(lil_envelope_upper(t)))


def _upper_term(n, epsilon, alpha):
    # t_n = alpha**n, written through n to avoid underflow for large n
    ll = np.log(np.asarray(n, dtype=float) * math.log(1.0 / alpha))
    return special.erfc((1.0 + epsilon) * np.sqrt(ll))


def _lower_term(n, epsilon, alpha):
    ll = np.log(np.asarray(n, dtype=float) * math.log(1.0 / alpha))
    return special.erfc((1.0 - epsilon) * np.sqrt(ll / 2.0))


def upper_series_terms(n, epsilon, alpha):
    return _upper_term(n, epsilon, alpha)


def lower_series_terms(n, epsilon, alpha):
    return _lower_term(n, epsilon, alpha)


def upper_series_limit(n_start: int, epsilon: float, alpha: float, n_direct: int = 200_000) -> float:
    """Sum of ``upper_series_terms`` over n >= n_start.

    Terms up to ``n_direct`` are summed directly; the remainder uses the
    midpoint integral approximation on a log scale.
    """
    if n_start * math.log(1.0 / alpha) <= 1.0:
        raise DomainError("series start must satisfy alpha**n_start < 1/e")
    n = np.arange(n_start, n_direct + 1, dtype=float)
    head = math.fsum(_upper_term(n, epsilon, alpha))
    lo = math.log(n_direct + 0.5)
    tail, _ = integrate.quad(lambda x: math.exp(x) * float(_upper_term(math.exp(x), epsilon, alpha)), lo, np.inf, limit=200)
    return head + tail


def series_decay_exponent(term, n: float, epsilon: float, alpha: float, h: float = 1e-3) -> float:
    """Local power-law exponent p with term(n) ~ n**(-p); the series is summable iff p > 1 eventually."""
    f = lambda x: math.log(float(term(x, epsilon, alpha)))
    return -(f(n * (1 + h)) - f(n * (1 - h))) / (math.log(1 + h) - math.log(1 - h))
