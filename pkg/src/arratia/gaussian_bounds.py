"""Gaussian-process bounds behind the lower iterated-logarithm estimate.

For ``t_k = alpha**k`` and ``u_k = (1 - eps) psi(t_k)`` the process lives on
disjoint intervals ``T_k`` of length ``t_k``, one for each k in ``[n, N]``.  A
point is addressed as ``(k, s)`` with local offset ``0 <= s <= t_k``, where

    X(k, s) = (w_0(s) - w_k(s)) / u_k

with ``w_0`` shared across intervals and ``w_k`` independent.  Points are kept
as (interval, offset) pairs because the global embedding
``[k - 1, k - 1 + t_k]`` cannot resolve offsets like 1e-60 in floating point.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .analytics import lil_envelope_lower
from .errors import ConfigError, DomainError
from .rng import run_blocks, stream

SUDAKOV_MIN_CAPACITY = 24
MIN_MESH = 64


def n0(alpha: float) -> int:
    """Smallest n with ``alpha**n < 1/e``, the first index where u_n is defined."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    return int(math.floor(1.0 / math.log(1.0 / alpha))) + 1


@dataclass(frozen=True)
class GaussianProcessParams:
    n: int
    N: int
    epsilon: float
    alpha: float

    def __post_init__(self):
        # eps = 0 is admitted as the limiting case of the formulas
        if not 0 <= self.epsilon < 1:
            raise DomainError("epsilon must lie in [0, 1)")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if self.N - self.n < 1:
            raise DomainError("need N > n")
        if self.n < n0(self.alpha):
            raise DomainError(f"n = {self.n} is below n0 = {n0(self.alpha)} for alpha = {self.alpha}")
        if self.alpha ** self.N == 0.0:
            raise DomainError("alpha**N underflows")

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n, self.N + 1)

    def t(self, k):
        return self.alpha ** np.asarray(k, dtype=float)

    def u(self, k):
        return (1.0 - self.epsilon) * np.asarray(lil_envelope_lower(self.t(k)))


@dataclass(frozen=True)
class IndexedTimeSet:
    """Disjoint intervals ``T_k`` of length ``t_k``, k in ``[n, N]``."""

    params: GaussianProcessParams

    def start(self, k: int) -> float:
        return 0.0 if k == self.params.n else float(k - 1)

    def length(self, k: int) -> float:
        return float(self.params.t(k))

    def contains(self, point) -> bool:
        k, s = point
        return self.params.n <= k <= self.params.N and 0.0 <= s <= self.length(k)

    def endpoints(self) -> list:
        return [(int(k), self.length(k)) for k in self.params.indices]

    def mesh(self, m: int) -> list:
        """``m`` equispaced offsets ``t_k j / m``, j = 1..m, for every interval."""
        return [(int(k), self.length(k) * np.arange(1, m + 1) / m) for k in self.params.indices]

    def global_time(self, point) -> float:
        k, s = point
        return self.start(k) + s


def sigma_sup(params: GaussianProcessParams) -> float:
    """Largest pointwise variance, 1 / ((1-eps)^2 (ln n + ln ln 1/alpha)); free of N."""
    denom = math.log(params.n) + math.log(math.log(1.0 / params.alpha))
    if denom <= 0:
        raise DomainError("ln n + ln ln(1/alpha) must be positive")
    return 1.0 / ((1.0 - params.epsilon) ** 2 * denom)


def covariance_X(s, t, params: GaussianProcessParams) -> float:
    ts = IndexedTimeSet(params)
    for p in (s, t):
        if not ts.contains(p):
            raise DomainError(f"point {p!r} is outside the index set")
    (j, a), (k, b) = s, t
    shared = min(a, b)  # w_0 component
    own = shared if j == k else 0.0  # w_k component
    return (shared + own) / float(params.u(j) * params.u(k))


def pseudometric(s, t, params: GaussianProcessParams) -> float:
    d2 = covariance_X(s, s, params) + covariance_X(t, t, params) - 2.0 * covariance_X(s, t, params)
    return math.sqrt(max(d2, 0.0))


def packing_radius(params: GaussianProcessParams) -> float:
    denom = math.log(params.N) + math.log(math.log(1.0 / params.alpha))
    if denom <= 0:
        raise DomainError("ln N + ln ln(1/alpha) must be positive")
    return 1.0 / (1.0 - params.epsilon) * math.sqrt(1.0 / denom)


class PackingCertificate(NamedTuple):
    radius: float
    points: int  # size of the certified radius-separated set
    min_distance: float
    ok: bool


def packing_certificate(params: GaussianProcessParams) -> PackingCertificate:
    """Check that the interval right endpoints are pairwise >= packing_radius apart."""
    delta = packing_radius(params)
    pts = IndexedTimeSet(params).endpoints()
    dmin = min(pseudometric(p, q, params) for i, p in enumerate(pts) for q in pts[i + 1 :])
    return PackingCertificate(delta, len(pts), dmin, dmin >= delta)


def capacity_lower_bound(params: GaussianProcessParams) -> int:
    """Metric capacity at the packing radius is at least N - n."""
    return params.N - params.n


class SudakovBound(NamedTuple):
    value: float
    certified: bool


def sudakov_lower_bound(capacity: int, radius: float) -> SudakovBound:
    """(1 - 1/sqrt(2M)) * delta * sqrt(ln M); certified only for M >= 24."""
    if capacity < 2:
        raise DomainError("capacity must be at least 2")
    if radius <= 0:
        raise DomainError("radius must be positive")
    m = float(capacity)
    value = (1.0 - 1.0 / math.sqrt(2.0 * m)) * radius * math.sqrt(math.log(m))
    return SudakovBound(value, capacity >= SUDAKOV_MIN_CAPACITY)


def concentration_tail(r: float, sigma: float) -> float:
    """Upper bound exp(-r^2 / (2 sigma)) on P{xi <= E xi - r}."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    if r < 0:
        raise DomainError("r must be non-negative")
    return math.exp(-r * r / (2.0 * sigma))


def alpha_admissible(epsilon: float, alpha: float) -> bool:
    return (1.0 - epsilon) ** 2 / 2.0 * (1.0 / math.sqrt(alpha) - 1.0) ** 2 > 1.0


# --- Monte Carlo -------------------------------------------------------------------


@dataclass(eq=False)
class XiStats:
    """Mesh suprema of X: ``xi`` on the requested mesh, ``xi_fine`` on the 2x mesh."""

    params: GaussianProcessParams
    mesh: int
    xi: np.ndarray
    xi_fine: np.ndarray
    point_var: np.ndarray  # empirical E[X^2] on the requested mesh, interval-major

    @property
    def replications(self) -> int:
        return self.xi.size

    @property
    def mean(self) -> float:
        return float(np.mean(self.xi))

    @property
    def se(self) -> float:
        return float(np.std(self.xi, ddof=1) / math.sqrt(self.xi.size))

    @property
    def var(self) -> float:
        return float(np.var(self.xi, ddof=1))

    @property
    def mesh_delta(self) -> float:
        """Mean refinement gain from doubling the mesh; an estimate of the mesh bias."""
        return float(np.mean(self.xi_fine) - np.mean(self.xi))

    @property
    def sup_variance(self) -> float:
        return float(np.max(self.point_var))

    @property
    def sup_variance_se(self) -> float:
        return self.sup_variance * math.sqrt(2.0 / (self.replications - 1))

    def lower_tail_frequency(self, r: float, allowance: float = 0.0) -> float:
        """Frequency of {xi <= mean(xi) + allowance - r}."""
        return float(np.mean(self.xi <= self.mean + allowance - r))


def _xi_layout(params, mesh):
    fine = 2 * mesh
    ks = params.indices
    tk = params.t(ks)
    offsets = (tk[:, None] * np.arange(1, fine + 1)[None, :] / fine).ravel()
    order = np.argsort(offsets, kind="stable")
    steps = np.diff(np.concatenate([[0.0], offsets[order]]))
    own_sd = np.sqrt(tk / fine)
    inv_u = 1.0 / params.u(ks)
    return order, np.sqrt(steps), own_sd, inv_u


def _xi_block(params, mesh, seed, tag, start, stop):
    order, w0_sd, own_sd, inv_u = _xi_layout(params, mesh)
    nk, fine = own_sd.size, 2 * mesh
    xi = np.empty(stop - start)
    xi_fine = np.empty(stop - start)
    acc = np.zeros((nk, mesh))
    w0 = np.empty(order.size)
    for r, i in enumerate(range(start, stop)):
        rng = stream(seed, tag, i)
        w0[order] = np.cumsum(w0_sd * rng.standard_normal(order.size))
        own = np.cumsum(own_sd[:, None] * rng.standard_normal((nk, fine)), axis=1)
        x = (w0.reshape(nk, fine) - own) * inv_u[:, None]
        coarse = x[:, 1::2]
        # X vanishes at every interval's left end, so the supremum is >= 0
        xi[r] = max(coarse.max(), 0.0)
        xi_fine[r] = max(x.max(), 0.0)
        acc += coarse * coarse
    return xi, xi_fine, acc


def simulate_xi(
    params: GaussianProcessParams, mesh: int, replications: int, seed: int, workers: int = 1
) -> XiStats:
    """Monte Carlo mesh supremum of X over all intervals."""
    if mesh < MIN_MESH:
        raise ConfigError(f"mesh must have at least {MIN_MESH} points per interval")
    if replications < 2:
        raise ConfigError("need at least 2 replications")
    tag = f"xi/{params.n}/{params.N}/{params.epsilon!r}/{params.alpha!r}/{mesh}"
    parts = run_blocks(functools.partial(_xi_block, params, mesh, seed, tag), replications, workers)
    acc = np.zeros_like(parts[0][2])
    for p in parts:
        acc += p[2]
    return XiStats(
        params=params,
        mesh=mesh,
        xi=np.concatenate([p[0] for p in parts]),
        xi_fine=np.concatenate([p[1] for p in parts]),
        point_var=(acc / replications).ravel(),
    )
