"""Finite coalescing Wiener particle systems started from a spatial grid.

Clusters are stored left to right by position together with the contiguous
block ``[lo, hi]`` of start indices they contain.  One step of length ``h``:

1. optional explicit Euler drift ``x + b(x) h``;
2. an independent ``N(0, h)`` increment per live cluster;
3. each adjacent pair merges if its post-step gap is <= 0, or with the
   Brownian-bridge crossing probability ``exp(-g0 g1 / h)`` of the gap process
   (variance rate 2);
4. merged groups sit at the mean of their members' post-step positions, and
   any remaining order violations are merged by a stack sweep.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numba
import numpy as np

from .errors import ConfigError, SimulationError
from .rng import check_seed, stream

MAX_DRIFT_STEP = 0.1  # dt * Lipschitz bound for explicit Euler


# --- configuration -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StartGrid:
    """Strictly increasing start positions containing 0."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigError("start grid needs at least 2 points")
        if not np.all(np.isfinite(pts)) or np.any(np.diff(pts) <= 0):
            raise ConfigError("start grid must be finite and strictly increasing")
        if not np.any(pts == 0.0):
            raise ConfigError("start grid must contain 0")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int) -> "StartGrid":
        pts = np.linspace(lo, hi, n)
        k = np.argmin(np.abs(pts))
        if abs(pts[k]) > 1e-9 * max(1.0, hi - lo):
            raise ConfigError(f"uniform grid on [{lo}, {hi}] with {n} points misses 0")
        pts[k] = 0.0
        return cls(pts)

    @classmethod
    def spaced(cls, left: float, right: float, spacing: float) -> "StartGrid":
        """Uniform grid through 0 with the given spacing covering [-left, right]."""
        nl = int(round(left / spacing))
        nr = int(round(right / spacing))
        return cls(np.arange(-nl, nr + 1) * spacing)

    @classmethod
    def geometric(cls, inner: float, outer: float, ratio: float, left: bool = True) -> "StartGrid":
        """Points ``0, +-inner * ratio**j`` up to ``outer``; fine near the origin."""
        if not (inner > 0 and outer > inner and ratio > 1):
            raise ConfigError("geometric grid needs 0 < inner < outer and ratio > 1")
        j = int(math.ceil(math.log(outer / inner) / math.log(ratio)))
        side = inner * ratio ** np.arange(j + 1)
        pts = np.concatenate([-side[::-1] if left else [], [0.0], side])
        return cls(pts)

    @property
    def origin_index(self) -> int:
        return int(np.flatnonzero(self.points == 0.0)[0])

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class Drift:
    """Scalar drift field ``func`` with declared Lipschitz constant.

    ``func`` maps a float to a float and must be compilable by numba.
    """

    func: Callable[[float], float]
    lipschitz: float
    name: str = "custom"

    def __post_init__(self):
        if not (math.isfinite(self.lipschitz) and self.lipschitz >= 0):
            raise ConfigError("drift Lipschitz constant must be finite and non-negative")

    def __call__(self, x):
        return self.func(x)


def constant_drift(c: float) -> Drift:
    c = float(c)
    return Drift(lambda x: c, 0.0, f"constant({c!r})")


def linear_drift(slope: float, intercept: float = 0.0) -> Drift:
    """b(x) = intercept + slope * x; ``slope < 0`` contracts particles together."""
    a, b = float(intercept), float(slope)
    return Drift(lambda x: a + b * x, abs(b), f"linear({b!r}, {a!r})")


@dataclass(frozen=True, eq=False)
class FlowConfig:
    grid: StartGrid
    horizon: float
    dt: float
    drift: Drift | None = None
    save_times: tuple = ()
    seed: int = 0
    bridge: bool = True
    min_substeps: int = 1  # lower bound on steps between consecutive save times

    def __post_init__(self):
        if not isinstance(self.grid, StartGrid):
            object.__setattr__(self, "grid", StartGrid(self.grid))
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError("horizon must be positive and finite")
        if not (0 < self.dt <= self.horizon):
            raise ConfigError("need 0 < dt <= horizon")
        st = tuple(float(s) for s in (self.save_times or (self.horizon,)))
        if any(b <= a for a, b in zip(st, st[1:])):
            raise ConfigError("save_times must be strictly increasing")
        if st[0] < 0 or st[-1] > self.horizon:
            raise ConfigError("save_times must lie in [0, horizon]")
        object.__setattr__(self, "save_times", st)
        object.__setattr__(self, "seed", check_seed(self.seed))
        if self.min_substeps < 1:
            raise ConfigError("min_substeps must be >= 1")
        if self.drift is not None and self.dt * self.drift.lipschitz > MAX_DRIFT_STEP:
            raise ConfigError(
                f"dt * Lipschitz = {self.dt * self.drift.lipschitz:g} exceeds {MAX_DRIFT_STEP}"
            )

    def describe(self) -> dict:
        g = self.grid.points
        return {
            "grid_points": int(g.size),
            "grid_min": float(g[0]),
            "grid_max": float(g[-1]),
            "grid_max_spacing": float(np.max(np.diff(g))),
            "horizon": self.horizon,
            "dt": self.dt,
            "drift": None if self.drift is None else self.drift.name,
            "save_times": list(self.save_times),
            "seed": self.seed,
            "bridge": self.bridge,
            "min_substeps": self.min_substeps,
        }


@functools.lru_cache(maxsize=None)
def time_mesh(horizon: float, dt: float, save_times: tuple, min_substeps: int = 1):
    """Step times covering [0, horizon] that hit every save time exactly.

    Returns ``(step_times, save_steps)`` where ``step_times[save_steps[i]]``
    equals ``save_times[i]``.
    """
    breaks = sorted(set([0.0, *save_times, horizon]))
    pieces = [np.array([0.0])]
    for a, b in zip(breaks[:-1], breaks[1:]):
        k = max(int(math.ceil((b - a) / dt - 1e-9)), min_substeps)
        seg = a + (b - a) * np.arange(1, k + 1) / k
        seg[-1] = b
        pieces.append(seg)
    times = np.concatenate(pieces)
    save_steps = np.searchsorted(times, np.asarray(save_times, dtype=float))
    assert np.array_equal(times[save_steps], np.asarray(save_times, dtype=float))
    times.setflags(write=False)
    save_steps.setflags(write=False)
    return times, save_steps


# --- kernels -------------------------------------------------------------------


@numba.njit(cache=True)
def _zero_drift(x):
    return 0.0


@functools.lru_cache(maxsize=None)
def _compiled_drift(func):
    if isinstance(func, numba.core.registry.CPUDispatcher):
        return func
    return numba.njit(func)


@numba.njit
def _record(s, m, pos, lo, hi, frame_cluster, frame_pos, frame_count):
    frame_count[s] = m
    for c in range(m):
        frame_pos[s, c] = pos[c]
        for i in range(lo[c], hi[c] + 1):
            frame_cluster[s, i] = c


@numba.njit
def _flow_kernel(grid, origin, times, save_steps, bridge, rng, drift, has_drift,
                 frame_cluster, frame_pos, frame_count, join_time):
    n = grid.size
    pos = grid.copy()
    lo = np.arange(n)
    hi = np.arange(n)
    old = np.empty(n)
    new = np.empty(n)
    flag = np.zeros(n, dtype=np.bool_)
    npos = np.empty(n)
    nw = np.empty(n, dtype=np.int64)
    nlo = np.empty(n, dtype=np.int64)
    nhi = np.empty(n, dtype=np.int64)

    m = n
    first_merge = np.inf
    for i in range(n):
        join_time[i] = np.inf
    join_time[origin] = times[0]
    olo = origin
    ohi = origin
    n_save = save_steps.size
    s = 0
    while s < n_save and save_steps[s] == 0:
        _record(s, m, pos, lo, hi, frame_cluster, frame_pos, frame_count)
        s += 1

    n_steps = times.size - 1
    for j in range(n_steps):
        if m == 1:
            if s >= n_save:
                break
            if not has_drift:
                # a lone cluster is a plain Wiener path: jump between save times
                t_cur = times[j]
                while s < n_save:
                    t_s = times[save_steps[s]]
                    pos[0] += math.sqrt(t_s - t_cur) * rng.standard_normal()
                    t_cur = t_s
                    _record(s, m, pos, lo, hi, frame_cluster, frame_pos, frame_count)
                    s += 1
                break
        h = times[j + 1] - times[j]
        sq = math.sqrt(h)
        for c in range(m):
            x = pos[c]
            old[c] = x
            if has_drift:
                b = drift(x)
                if not np.isfinite(b):
                    return 1, x, first_merge
                x += b * h
            new[c] = x + sq * rng.standard_normal()
        for c in range(m - 1):
            ga = new[c + 1] - new[c]
            if ga <= 0.0:
                flag[c] = True
            elif bridge:
                gb = old[c + 1] - old[c]
                flag[c] = rng.random() < math.exp(-gb * ga / h)
            else:
                flag[c] = False

        k = 0
        c = 0
        while c < m:
            acc = new[c]
            cnt = 1
            glo = lo[c]
            ghi = hi[c]
            while c < m - 1 and flag[c]:
                c += 1
                acc += new[c]
                cnt += 1
                ghi = hi[c]
            c += 1
            npos[k] = acc / cnt
            nw[k] = cnt
            nlo[k] = glo
            nhi[k] = ghi
            k += 1
            while k >= 2 and npos[k - 1] <= npos[k - 2]:
                tot = nw[k - 1] + nw[k - 2]
                npos[k - 2] = (npos[k - 2] * nw[k - 2] + npos[k - 1] * nw[k - 1]) / tot
                nw[k - 2] = tot
                nhi[k - 2] = nhi[k - 1]
                k -= 1

        merged = k < m
        for c in range(k):
            pos[c] = npos[c]
            lo[c] = nlo[c]
            hi[c] = nhi[c]
        m = k
        t_next = times[j + 1]
        if merged:
            if first_merge == np.inf:
                first_merge = t_next
            c0 = 0
            while hi[c0] < origin:
                c0 += 1
            for i in range(lo[c0], olo):
                join_time[i] = t_next
            for i in range(ohi + 1, hi[c0] + 1):
                join_time[i] = t_next
            olo = lo[c0]
            ohi = hi[c0]
        while s < n_save and save_steps[s] == j + 1:
            _record(s, m, pos, lo, hi, frame_cluster, frame_pos, frame_count)
            s += 1
    return 0, 0.0, first_merge


# --- results -------------------------------------------------------------------


@dataclass(eq=False)
class FlowPath:
    """Cluster positions and start-index membership at each save time."""

    grid: np.ndarray
    save_times: tuple
    cluster_of: np.ndarray  # (n_save, n_points) start index -> cluster index
    positions: list  # per save time, increasing cluster positions
    join_time: np.ndarray  # time each start point joined the origin cluster
    first_merge_time: float
    origin_index: int

    def n_clusters(self, s: int) -> int:
        return self.positions[s].size

    def cluster_bounds(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Leftmost and rightmost start index of every cluster at save index ``s``."""
        cl = self.cluster_of[s]
        starts = np.flatnonzero(np.diff(cl, prepend=-1))
        ends = np.append(starts[1:] - 1, cl.size - 1)
        return starts, ends

    def rows(self, replication: int = 0) -> Iterable[tuple]:
        for s, t in enumerate(self.save_times):
            lo, hi = self.cluster_bounds(s)
            for c, x in enumerate(self.positions[s]):
                yield (replication, t, c, float(x), int(lo[c]), int(hi[c]))


FLOWPATH_CSV_COLUMNS = (
    "replication",
    "save_time",
    "cluster_index",
    "position",
    "leftmost_start_index",
    "rightmost_start_index",
)


def write_flowpaths_csv(paths: Sequence[FlowPath], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(FLOWPATH_CSV_COLUMNS)
    for r, p in enumerate(paths):
        for row in p.rows(r):
            w.writerow([row[0], repr(row[1]), row[2], repr(row[3]), row[4], row[5]])


class Widths(NamedTuple):
    left: float
    right: float
    nu_hat: float


@dataclass(eq=False)
class ClusterWidthSeries:
    """Origin-cluster widths along the save times.

    The true right width lies in ``[right, right + right_bias]``, and likewise on
    the left; ``touches_boundary`` marks frames where the cluster reached the
    end of the grid and the width is censored.
    """

    save_times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    nu_hat: np.ndarray
    left_bias: np.ndarray
    right_bias: np.ndarray
    touches_boundary: np.ndarray


def simulate_flow(config: FlowConfig, rng: np.random.Generator | None = None) -> FlowPath:
    """Run one replication of the coalescing system described by ``config``."""
    if rng is None:
        rng = stream(config.seed, "flow", 0)
    grid = config.grid.points
    times, save_steps = time_mesh(config.horizon, config.dt, config.save_times, config.min_substeps)
    n, ns = grid.size, save_steps.size
    frame_cluster = np.empty((ns, n), dtype=np.int64)
    frame_pos = np.empty((ns, n))
    frame_count = np.empty(ns, dtype=np.int64)
    join_time = np.empty(n)
    if config.drift is None:
        drift, has_drift = _zero_drift, False
    else:
        drift, has_drift = _compiled_drift(config.drift.func), True
    status, bad, first_merge = _flow_kernel(
        grid, config.grid.origin_index, times, save_steps, config.bridge, rng, drift, has_drift,
        frame_cluster, frame_pos, frame_count, join_time,
    )
    if status != 0:
        raise SimulationError(f"non-finite drift evaluated at position {bad!r}", position=bad)
    return FlowPath(
        grid=grid,
        save_times=config.save_times,
        cluster_of=frame_cluster,
        positions=[frame_pos[s, : frame_count[s]].copy() for s in range(ns)],
        join_time=join_time,
        first_merge_time=float(first_merge),
        origin_index=config.grid.origin_index,
    )


def origin_cluster_width(path: FlowPath, s: int) -> Widths:
    """Left, right and total width of the origin cluster at save index ``s``."""
    cl = path.cluster_of[s]
    members = np.flatnonzero(cl == cl[path.origin_index])
    left = -float(path.grid[members[0]])
    right = float(path.grid[members[-1]])
    return Widths(left, right, left + right)


def width_series(path: FlowPath) -> ClusterWidthSeries:
    g = path.grid
    n = g.size
    rows = []
    for s in range(len(path.save_times)):
        cl = path.cluster_of[s]
        members = np.flatnonzero(cl == cl[path.origin_index])
        a, b = members[0], members[-1]
        lb = g[a] - g[a - 1] if a > 0 else np.inf
        rb = g[b + 1] - g[b] if b < n - 1 else np.inf
        rows.append((-g[a], g[b], lb, rb, a == 0 or b == n - 1))
    left, right, lb, rb, touch = (np.array(col) for col in zip(*rows))
    return ClusterWidthSeries(
        save_times=np.asarray(path.save_times),
        left=left,
        right=right,
        nu_hat=left + right,
        left_bias=lb,
        right_bias=rb,
        touches_boundary=touch.astype(bool),
    )


def right_width_at(path: FlowPath, t: float) -> float:
    """Right width at any time up to the horizon, from the recorded join times."""
    g = path.grid
    o = path.origin_index
    joined = np.flatnonzero(path.join_time[o:] <= t)
    return float(g[o + joined[-1]])


# --- single-step helpers ---------------------------------------------------------


def bridge_crossing_probability(gap_before, gap_after, dt):
    """P{gap process with variance rate 2 hits 0 within a step | endpoint gaps}."""
    return np.exp(-np.asarray(gap_before) * np.asarray(gap_after) / dt)


def coalesce_check(gap_before: float, gap_after: float, dt: float, rng: np.random.Generator) -> bool:
    """Randomised merge decision for an adjacent pair whose gap stayed positive."""
    if gap_before <= 0 or gap_after <= 0 or dt <= 0:
        raise ValueError("coalesce_check expects positive gaps and step")
    return bool(rng.random() < math.exp(-gap_before * gap_after / dt))


def apply_drift_step(positions, drift: Drift | Callable | None, dt: float) -> np.ndarray:
    """Explicit Euler drift update ``x + b(x) dt``."""
    x = np.asarray(positions, dtype=float)
    if drift is None:
        return x.copy()
    b = np.array([drift(v) for v in x], dtype=float)
    bad = ~np.isfinite(b)
    if np.any(bad):
        where = float(x[np.argmax(bad)])
        raise SimulationError(f"non-finite drift evaluated at position {where!r}", position=where)
    return x + b * dt
