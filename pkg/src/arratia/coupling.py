"""Coupled one-particle motions glued together from independent Wiener paths.

Given start levels ``u_1 > u_2 > ... > u_K > 0`` and independent paths
``w_0, ..., w_K`` the first family follows ``u_k + w_k`` until it meets the
previous member and then follows that member.  The second family follows the
first until it meets ``w_0`` and is absorbed into ``w_0`` from then on.  Its
finite-dimensional laws coincide with those of the Arratia flow started from
``(u_k)`` and ``0``, which ``coupling_equivalence_test`` checks against the
flow engine.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import analytics
from .errors import ConfigError, DomainError
from .flow import FlowConfig, StartGrid, simulate_flow
from .report import FAIL, INFO, PASS, ExperimentReport
from .rng import replicate
from .stats import ks_two_sample, two_binomial_check

BRIDGE_SHIFT = 0.5826  # zeta(1/2)/sqrt(2 pi): discrete-monitoring barrier shift per unit sd
MIN_REPLICATIONS = 1000


def mesh_times(dt: float, horizon: float = 1.0) -> np.ndarray:
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * horizon:
        raise ConfigError(f"mesh step {dt} does not divide horizon {horizon}")
    return np.arange(n + 1) * (horizon / n)


@dataclass(eq=False)
class WienerBundle:
    """Independent standard Wiener paths ``w_0..w_n`` on a common mesh."""

    paths: np.ndarray  # (n_paths, n_mesh + 1), paths[:, 0] == 0
    times: np.ndarray
    seed: int | None = None

    @classmethod
    def sample(cls, n_paths: int, dt: float, rng: np.random.Generator, horizon: float = 1.0, seed=None):
        times = mesh_times(dt, horizon)
        z = rng.standard_normal((n_paths, times.size - 1))
        z *= math.sqrt(horizon / (times.size - 1))
        np.cumsum(z, axis=1, out=z)
        paths = np.concatenate([np.zeros((n_paths, 1)), z], axis=1)
        return cls(paths, times, seed)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self):
        return self.paths.shape[0]


def collision_time(f, g, times) -> float:
    """First time the paths ``f`` and ``g`` meet, ``inf`` if they never do.

    The meeting step is the first mesh point where ``f - g`` is zero or has
    left its initial sign; inside that step the crossing is located by linear
    interpolation.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    times = np.asarray(times, dtype=float)
    if f.shape != g.shape or f.shape != times.shape:
        raise ValueError(f"mesh mismatch: {f.shape}, {g.shape}, {times.shape}")
    d = f - g
    if d[0] == 0.0:
        return float(times[0])
    hit = d <= 0.0 if d[0] > 0 else d >= 0.0
    j = int(np.argmax(hit))
    if not hit[j]:
        return math.inf
    frac = d[j - 1] / (d[j - 1] - d[j])
    return float(times[j - 1] + frac * (times[j] - times[j - 1]))


@dataclass(eq=False)
class CoupledFamily:
    levels: np.ndarray
    times: np.ndarray
    w0: np.ndarray
    y_tilde: np.ndarray  # first family, one row per level
    paths: np.ndarray  # absorbed family, one row per level
    tau_origin: np.ndarray  # tau[absorbed(u_k), w_0]
    tau_neighbor: np.ndarray  # tau[y_tilde(u_{k-1}), y_tilde(u_k)], nan for k = 1

    def absorption_holds(self) -> bool:
        for k, tau in enumerate(self.tau_origin):
            after = self.times >= tau
            if not np.array_equal(self.paths[k, after], self.w0[after]):
                return False
        return True

    def ordering_holds(self) -> bool:
        stack = np.vstack([self.paths, self.w0])
        return bool(np.all(np.diff(stack, axis=0) <= 0.0))

    def collision_order_holds(self) -> bool:
        tau = self.tau_origin
        return bool(np.all(tau[1:] <= tau[:-1]))


def _check_levels(levels) -> np.ndarray:
    u = np.asarray(levels, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise DomainError("need at least one level")
    if np.any(u <= 0) or np.any(np.diff(u) >= 0):
        raise DomainError("levels must be positive and strictly decreasing")
    return u


def build_coupled_family(levels, bundle: WienerBundle) -> CoupledFamily:
    u = _check_levels(levels)
    if len(bundle) < u.size + 1:
        raise DomainError(f"bundle has {len(bundle)} paths, need {u.size + 1}")
    times = bundle.times
    w = bundle.paths
    w0 = w[0]

    y_tilde = np.empty((u.size, times.size))
    tau_nb = np.full(u.size, np.nan)
    for k in range(u.size):
        free = u[k] + w[k + 1]
        if k == 0:
            y_tilde[0] = free
            continue
        tau = collision_time(free, y_tilde[k - 1], times)
        tau_nb[k] = tau
        y_tilde[k] = np.where(times < tau, free, y_tilde[k - 1])

    paths = np.empty_like(y_tilde)
    tau0 = np.empty(u.size)
    for k in range(u.size):
        tau = collision_time(y_tilde[k], w0, times)
        paths[k] = np.where(times < tau, y_tilde[k], w0)
        tau0[k] = collision_time(paths[k], w0, times)
    return CoupledFamily(u, times, w0, y_tilde, paths, tau0, tau_nb)


# --- equivalence experiment ------------------------------------------------------


def _coupling_replication(levels, mesh_dt, rng, index):
    bundle = WienerBundle.sample(len(levels) + 1, mesh_dt, rng)
    fam = build_coupled_family(levels, bundle)
    return fam.tau_origin, fam.absorption_holds(), fam.ordering_holds(), fam.collision_order_holds()


def _flow_join_times(config, rng, index):
    p = simulate_flow(config, rng)
    return p.join_time


def flow_collision_times(grid_points, replications, seed, tag, dt=1e-4, horizon=1.0, workers=1):
    """Times at which each start point joins the origin cluster, one row per replication."""
    cfg = FlowConfig(StartGrid(np.asarray(grid_points, dtype=float)), horizon=horizon, dt=dt)
    rows = replicate(functools.partial(_flow_join_times, cfg), replications, seed, tag, workers)
    return cfg.grid.points, np.array(rows)


def mesh_cdf_shift(level: float, mesh_dt: float) -> float:
    """Largest CDF error from shifting the gap by the discrete-monitoring correction."""
    shift = BRIDGE_SHIFT * math.sqrt(2.0 * mesh_dt)
    t = np.geomspace(1e-6, 1.0, 2000)
    f0 = analytics.hitting_time_cdf(level / math.sqrt(2), t)
    f1 = analytics.hitting_time_cdf((level + shift) / math.sqrt(2), t)
    return float(np.max(np.abs(f0 - f1)))


def coupling_equivalence_test(
    levels,
    replications: int,
    seed: int,
    mesh_dt: float = 1e-5,
    flow_dt: float = 1e-4,
    probe_times=(0.05, 0.2, 0.5, 1.0),
    level: float = 0.01,
    workers: int = 1,
) -> ExperimentReport:
    """Compare the coupled family's collision times with direct flow runs."""
    u = _check_levels(levels)
    if replications < MIN_REPLICATIONS:
        raise ConfigError(f"need at least {MIN_REPLICATIONS} replications, got {replications}")
    started = time.perf_counter()
    config = {
        "levels": u.tolist(),
        "replications": replications,
        "mesh_dt": mesh_dt,
        "flow_dt": flow_dt,
        "probe_times": list(probe_times),
        "level": level,
    }
    rep = ExperimentReport("coupling-check", config, seed)

    out = replicate(functools.partial(_coupling_replication, u, mesh_dt), replications, seed, "coupling", workers)
    tau_c = np.array([o[0] for o in out])
    absorb = sum(o[1] for o in out)
    order = sum(o[2] for o in out)
    corder = sum(o[3] for o in out)
    rep.add("absorption_replications_ok", absorb, threshold=replications, verdict=absorb == replications)
    rep.add("ordering_replications_ok", order, threshold=replications, verdict=order == replications)
    rep.add("collision_order_replications_ok", corder, threshold=replications, verdict=corder == replications)

    horizon = 1.0
    rows = []
    for k, uk in enumerate(u):
        _, jt = flow_collision_times([0.0, uk], replications, seed, f"coupling-flow-{k}", flow_dt, horizon, workers)
        tf = jt[:, 1]
        # censor both samples just past the horizon
        a = np.where(np.isfinite(tau_c[:, k]), tau_c[:, k], 2 * horizon)
        b = np.where(np.isfinite(tf), tf, 2 * horizon)
        ks = ks_two_sample(a, b, y_band=(-flow_dt, 0.0))
        ok = ks.pvalue > level
        rep.add(f"ks_level_{float(uk):g}", ks.statistic, threshold=level, verdict=ok, note=f"p={ks.pvalue!r}")
        rows.append(
            {
                "level": float(uk),
                "ks_statistic": ks.statistic,
                "p_value": ks.pvalue,
                "replications": replications,
                "mesh_dt": mesh_dt,
                "mesh_cdf_bias": mesh_cdf_shift(float(uk), mesh_dt),
            }
        )
    rep.tables["coupling"] = rows

    if u.size > 1:
        _, jt = flow_collision_times(
            np.concatenate([[0.0], u[::-1]]), replications, seed, "coupling-flow-joint", flow_dt, horizon, workers
        )
        tau_f = jt[:, :0:-1]  # columns back in level order u_1 > u_2 > ...
        for t in probe_times:
            code_c = (tau_c <= t) @ (1 << np.arange(u.size))
            code_f = (tau_f <= t) @ (1 << np.arange(u.size))
            for pattern in sorted(set(code_c.tolist()) | set(code_f.tolist())):
                kc = int(np.sum(code_c == pattern))
                kf = int(np.sum(code_f == pattern))
                chk = two_binomial_check(kc, replications, kf, replications)
                bits = "".join("1" if pattern >> i & 1 else "0" for i in range(u.size))
                rep.add(
                    f"joint_t{t!r}_pattern_{bits}",
                    chk.frequency,
                    error=chk.se,
                    threshold=3.0,
                    verdict=chk.ok,
                    note=f"flow={chk.expected!r}",
                )
    rep.wall_time = time.perf_counter() - started
    return rep
