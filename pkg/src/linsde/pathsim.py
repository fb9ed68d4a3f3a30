"""
Exact event-driven simulation of X_t = X_0 + Y_t - int_(0,t] X_{s-} dZ_s.

Between jumps X solves the linear ODE dX = (r - c X) dt with r, c the
drifts of Y and Z, so a path is a finite list of exponential segments and
can be evaluated anywhere without a grid.  At a Y-jump X moves up by the
jump size; at a Z-jump of size q it is multiplied by 1 - q.  A Y-jump and
a Z-jump at the same instant act as X_t = X_{t-} (1 - dZ_t) + dY_t.

Alongside the recursion this module evaluates the explicit solution

    X_t = X_0 U_{0,t} + int_(0,t] U_{u,t} dY_u,
    U_{u,t} = exp(-c (t-u)) prod_{u<s<=t} (1 - dZ_s),

directly, so the two routes can be checked against each other, and a
fixed-point residual that re-inserts a path into the equation.

:func:`simulate_gou_discrete` is a separate grid engine for Z with a
Brownian part, where U carries the -sigma^2/2 quadratic-variation
correction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import DriverPair, JumpComponent, JumpDistribution, SpecError, validate_spec

__all__ = [
    "Event",
    "EventStream",
    "EventBatch",
    "Path",
    "GaussianZSpec",
    "sample_events",
    "sample_event_batch",
    "sample_renewal_collapses",
    "sample_renewal_batch",
    "stationary_excess_inverse",
    "merge_streams",
    "evolve",
    "evolve_batch",
    "u_factor",
    "representation_eval",
    "residual_check",
    "simulate_gou_discrete",
    "gou_reference",
    "gou_noise",
]

Y, Z = "Y", "Z"


# -- numerically stable pieces of the segment solution -------------------------


def _phi1(x):
    """(1 - exp(-x)) / x, equal to 1 at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 2, -np.expm1(-safe) / safe)


def _phi2(x):
    """(x - 1 + exp(-x)) / x^2, equal to 1/2 at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    safe = np.where(small, 1.0, x)
    series = 0.5 - x / 6 + x**2 / 24 - x**3 / 120 + x**4 / 720
    return np.where(small, series, (safe + np.expm1(-safe)) / safe**2)


def _flow(v, r, c, dt):
    """Solution of dX = (r - cX) dt after time ``dt`` from value ``v``."""
    return v * np.exp(-c * dt) + r * dt * _phi1(c * dt)


def _flow_integral_c(v, r, c, dt):
    """c * int_0^dt X_s ds along the same segment."""
    return -v * np.expm1(-c * dt) + r * c * dt * dt * _phi2(c * dt)


# -- events ---------------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    time: float
    source: str
    size: float

    def __post_init__(self):
        if self.source not in (Y, Z):
            raise ValueError(f"event source must be 'Y' or 'Z', got {self.source!r}")
        if not self.size > 0:
            raise ValueError("event size must be positive")
        if self.source == Z and self.size > 1:
            raise ValueError("Z event larger than 1")


@dataclass(frozen=True, eq=False)
class EventStream:
    """Realized jumps of (Y, Z) on (0, horizon], in time order.

    Stored column-wise; ``is_z`` marks Z-events.  At a shared time the
    Z-event precedes the Y-event.
    """

    horizon: float
    times: np.ndarray
    sizes: np.ndarray
    is_z: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.sizes, dtype=float)
        z = np.asarray(self.is_z, dtype=bool)
        if not (t.shape == s.shape == z.shape and t.ndim == 1):
            raise ValueError("times, sizes and is_z must be 1-d arrays of equal length")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if t.size:
            if t[0] <= 0 or t[-1] > self.horizon:
                raise ValueError("event beyond horizon (times must lie in (0, horizon])")
            dt = np.diff(t)
            if np.any(dt < 0):
                raise ValueError("event times must be sorted")
            tie = dt == 0
            # only a Z-event followed by a Y-event may share a time
            if np.any(tie & ~(z[:-1] & ~z[1:])):
                raise ValueError("simultaneous events must be one Z followed by one Y")
            if np.any(s <= 0) or np.any(s[z] > 1):
                raise ValueError("event sizes must be positive, Z sizes at most 1")
        for name, arr in (("times", t), ("sizes", s), ("is_z", z)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_events(cls, horizon: float, events: Iterable[Event]) -> "EventStream":
        ev = sorted(events, key=lambda e: (e.time, e.source != Z))
        return cls(
            float(horizon),
            np.array([e.time for e in ev], dtype=float),
            np.array([e.size for e in ev], dtype=float),
            np.array([e.source == Z for e in ev], dtype=bool),
        )

    @classmethod
    def empty(cls, horizon: float) -> "EventStream":
        return cls(float(horizon), np.empty(0), np.empty(0), np.empty(0, dtype=bool))

    @property
    def events(self) -> list[Event]:
        return [
            Event(float(t), Z if z else Y, float(s)) for t, s, z in zip(self.times, self.sizes, self.is_z)
        ]

    def __len__(self) -> int:
        return self.times.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.sizes, other.sizes)
            and np.array_equal(self.is_z, other.is_z)
        )

    def y_jumps_upto(self, t: float) -> float:
        m = (~self.is_z) & (self.times <= t)
        return float(self.sizes[m].sum())


def merge_streams(a: EventStream, b: EventStream) -> EventStream:
    if a.horizon != b.horizon:
        raise ValueError("streams have different horizons")
    return EventStream.from_events(a.horizon, a.events + b.events)


@dataclass(frozen=True, eq=False)
class EventBatch:
    """Events of many replications, padded to a common width.

    Row ``i`` holds replication ``i``; unused slots have time ``inf``.
    """

    horizon: np.ndarray
    times: np.ndarray
    sizes: np.ndarray
    is_z: np.ndarray
    counts: np.ndarray

    @property
    def size(self) -> int:
        return self.times.shape[0]

    def stream(self, i: int) -> EventStream:
        k = self.counts[i]
        return EventStream(
            float(self.horizon[i]), self.times[i, :k].copy(), self.sizes[i, :k].copy(), self.is_z[i, :k].copy()
        )

    def take(self, rows) -> "EventBatch":
        rows = np.asarray(rows)
        counts = self.counts[rows]
        k = int(counts.max()) if counts.size else 0
        return EventBatch(
            self.horizon[rows], self.times[rows, :k], self.sizes[rows, :k], self.is_z[rows, :k], counts
        )


def _pad(size, rep, times, sizes, is_z, horizon) -> EventBatch:
    order = np.lexsort((times, rep))
    rep, times, sizes, is_z = rep[order], times[order], sizes[order], is_z[order]
    counts = np.bincount(rep, minlength=size)
    k = int(counts.max()) if counts.size and rep.size else 0
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    col = np.arange(rep.size) - offsets[rep]
    T = np.full((size, k), np.inf)
    S = np.zeros((size, k))
    Zm = np.zeros((size, k), dtype=bool)
    T[rep, col] = times
    S[rep, col] = sizes
    Zm[rep, col] = is_z
    return EventBatch(horizon, T, S, Zm, counts)


def _draw_components(components: Sequence[JumpComponent], horizon: np.ndarray, rng, src_z: bool):
    reps, times, sizes = [], [], []
    idx = np.arange(horizon.size)
    for comp in components:
        n = rng.poisson(comp.rate * horizon)
        tot = int(n.sum())
        rep = np.repeat(idx, n)
        # uniform on (0, H]
        times.append(horizon[rep] * (1.0 - rng.random(tot)))
        sizes.append(comp.dist.sample(rng, tot))
        reps.append(rep)
    if not reps:
        e = np.empty(0)
        return np.empty(0, dtype=np.int64), e, e, np.empty(0, dtype=bool)
    rep = np.concatenate(reps)
    return rep, np.concatenate(times), np.concatenate(sizes), np.full(rep.size, src_z)


def sample_event_batch(pair: DriverPair, horizon, size: int, rng: np.random.Generator) -> EventBatch:
    """Jumps of ``size`` independent replications of (Y, Z).

    ``horizon`` may be a scalar or one horizon per replication.  Each
    compound-Poisson component contributes a Poisson number of jumps at
    i.i.d. uniform times; components are drawn in the order y, then z.
    """
    validate_spec(pair)
    H = np.broadcast_to(np.asarray(horizon, dtype=float), (size,)).copy()
    if np.any(H <= 0):
        raise ValueError("horizon must be positive")
    ry, ty, sy, zy = _draw_components(pair.y.components, H, rng, False)
    rz, tz, sz, zz = _draw_components(pair.z.components, H, rng, True)
    rep = np.concatenate([ry, rz])
    times = np.concatenate([ty, tz])
    sizes = np.concatenate([sy, sz])
    is_z = np.concatenate([zy, zz])
    # exact ties have probability zero; redraw the later one if one shows up
    while rep.size > 1:
        order = np.lexsort((times, rep))
        dup = (np.diff(times[order]) == 0) & (np.diff(rep[order]) == 0)
        if not dup.any():
            break
        bad = order[1:][dup]
        times[bad] = H[rep[bad]] * (1.0 - rng.random(bad.size))
    return _pad(size, rep, times, sizes, is_z, H)


def sample_events(pair: DriverPair, horizon: float, rng: np.random.Generator) -> EventStream:
    """One replication of the (Y, Z) jumps on (0, horizon]."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    return sample_event_batch(pair, horizon, 1, rng).stream(0)


# -- renewal collapses ----------------------------------------------------------


def stationary_excess_inverse(law: JumpDistribution, u) -> np.ndarray:
    """Inverse CDF of the stationary-excess law with density (1 - F(x)) / mean.

    Closed form for deterministic, uniform and exponential inter-renewal
    times; Erlang(k) is inverted by safeguarded Newton to |F_e(x) - u| <= 1e-12.
    """
    u = np.asarray(u, dtype=float)
    if law.kind == "point":
        return law.scale * u
    if law.kind == "uniform":
        # F_e(x) = 2x/b - (x/b)^2
        return law.scale * (1.0 - np.sqrt(1.0 - u))
    if law.kind == "exp" or (law.kind == "erlang" and law.shape == 1):
        return -law.scale * np.log1p(-u)
    return _erlang_excess_inverse(law.shape, law.scale, u)


def _erlang_excess_cdf(k, mean, x):
    from scipy.special import gammainc

    rate = k / mean
    return sum(gammainc(j, rate * x) for j in range(1, k + 1)) / k


def _erlang_excess_inverse(k, mean, u, tol=1e-12, max_iter=200):
    from scipy.special import gammaincc

    u = np.atleast_1d(u).astype(float)
    lo = np.zeros_like(u)
    hi = np.full_like(u, mean)
    while True:
        low = _erlang_excess_cdf(k, mean, hi) < u
        if not low.any():
            break
        hi = np.where(low, 2 * hi, hi)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        F = _erlang_excess_cdf(k, mean, x)
        err = F - u
        if np.all(np.abs(err) <= tol):
            break
        lo = np.where(err < 0, x, lo)
        hi = np.where(err > 0, x, hi)
        dens = gammaincc(k, k / mean * x) / mean
        with np.errstate(divide="ignore", invalid="ignore"):
            nx = x - err / dens
        ok = np.isfinite(nx) & (nx > lo) & (nx < hi)
        x = np.where(ok, nx, 0.5 * (lo + hi))
    else:
        raise RuntimeError("stationary-excess inversion did not converge")
    return x


def sample_renewal_batch(
    law: JumpDistribution, horizon: float, size: int, rng: np.random.Generator, stationary: bool = True
) -> EventBatch:
    """Total collapses (Z-events of size 1) at renewal epochs, ``size`` replications.

    With ``stationary`` the first epoch follows the stationary-excess law,
    which makes the counting process time-stationary.
    """
    if law.kind not in ("point", "uniform", "exp", "erlang"):
        raise SpecError(f"unsupported inter-renewal law {law.kind!r}")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if stationary:
        first = stationary_excess_inverse(law, 1.0 - rng.random(size))
    else:
        first = law.sample(rng, size)
    reps, times = [], []
    cur = first
    alive = np.arange(size)
    while alive.size:
        keep = cur <= horizon
        alive, cur = alive[keep], cur[keep]
        reps.append(alive)
        times.append(cur)
        if not alive.size:
            break
        cur = cur + law.sample(rng, alive.size)
    rep = np.concatenate(reps)
    t = np.concatenate(times)
    return _pad(size, rep, t, np.ones(rep.size), np.ones(rep.size, dtype=bool), np.full(size, float(horizon)))


def sample_renewal_collapses(
    law: JumpDistribution, horizon: float, rng: np.random.Generator, stationary: bool = True
) -> EventStream:
    return sample_renewal_batch(law, horizon, 1, rng, stationary).stream(0)


# -- exact paths ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Path:
    """Piecewise-exact path: segment ``i`` starts at ``starts[i]`` from ``values[i]``."""

    x0: float
    r: float
    c: float
    horizon: float
    starts: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise ValueError("evaluation time outside [0, horizon]")
        i = np.searchsorted(self.starts, t, side="right") - 1
        out = _flow(self.values[i], self.r, self.c, t - self.starts[i])
        return out if out.ndim else float(out)

    def left_limit(self, t):
        """X_{t-}; equals X_0 at t = 0."""
        t = np.asarray(t, dtype=float)
        i = np.maximum(np.searchsorted(self.starts, t, side="left") - 1, 0)
        out = _flow(self.values[i], self.r, self.c, t - self.starts[i])
        return out if out.ndim else float(out)

    def __eq__(self, other):
        if not isinstance(other, Path):
            return NotImplemented
        return (
            (self.x0, self.r, self.c, self.horizon) == (other.x0, other.r, other.c, other.horizon)
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.values, other.values)
        )


def evolve(x0: float, pair: DriverPair, events: EventStream, horizon: float | None = None) -> Path:
    """Run the jump recursion over ``events``; exact ODE flow in between."""
    horizon = events.horizon if horizon is None else float(horizon)
    if len(events) and events.times[-1] > horizon:
        raise ValueError("event beyond horizon")
    r, c = pair.y.drift, pair.z.drift
    starts = [0.0]
    values = [float(x0)]
    t_prev, v = 0.0, float(x0)
    k, n = 0, len(events)
    T, S, ZZ = events.times, events.sizes, events.is_z
    while k < n:
        tau = T[k]
        v = float(_flow(v, r, c, tau - t_prev))
        # collapse the pre-jump value first, then add Y jumps at the same time
        while k < n and T[k] == tau and ZZ[k]:
            v *= 1.0 - S[k]
            k += 1
        while k < n and T[k] == tau and not ZZ[k]:
            v += S[k]
            k += 1
        starts.append(float(tau))
        values.append(v)
        t_prev = tau
    return Path(float(x0), r, c, horizon, np.array(starts), np.array(values))


def evolve_batch(x0, r, c: float, batch: EventBatch, grid: Sequence[float]) -> np.ndarray:
    """X at each time of the sorted ``grid`` for every row of ``batch``.

    ``x0`` and ``r`` broadcast over rows (a per-row ``r`` gives a random
    drift).  Returns an array of shape (rows, len(grid)).
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    R, K = batch.times.shape
    x = np.broadcast_to(np.asarray(x0, dtype=float), (R,)).copy()
    r = np.broadcast_to(np.asarray(r, dtype=float), (R,))
    tc = np.zeros(R)
    ptr = np.zeros(R, dtype=np.int64)
    out = np.empty((R, grid.size))
    times = np.concatenate([batch.times, np.full((R, 1), np.inf)], axis=1)
    rows = np.arange(R)
    for j, g in enumerate(grid):
        while True:
            tn = times[rows, ptr]
            idx = np.nonzero(tn <= g)[0]
            if idx.size == 0:
                break
            k = ptr[idx]
            xi = _flow(x[idx], r[idx], c, tn[idx] - tc[idx])
            s = batch.sizes[idx, k]
            x[idx] = np.where(batch.is_z[idx, k], xi * (1.0 - s), xi + s)
            tc[idx] = tn[idx]
            ptr[idx] = k + 1
        out[:, j] = _flow(x, r, c, g - tc)
    return out


def u_factor(events: EventStream, c: float, u: float, t: float) -> float:
    """U_{u,t} = exp(-c (t-u)) prod over Z-events in (u, t] of (1 - size)."""
    if u > t:
        raise ValueError("u must not exceed t")
    if u == t:
        return 1.0
    m = events.is_z & (events.times > u) & (events.times <= t)
    return math.exp(-c * (t - u)) * float(np.prod(1.0 - events.sizes[m]))


def representation_eval(x0: float, pair: DriverPair, events: EventStream, t):
    """X_t from the explicit solution, independently of :func:`evolve`.

    The dY integral splits into the Y-jumps, each weighted by U_{u,t}, and
    the drift part, integrated in closed form over each stretch between
    Z-events.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts > events.horizon) or np.any(ts < 0):
        raise ValueError("evaluation time outside [0, horizon]")
    r, c = pair.y.drift, pair.z.drift
    zt = events.times[events.is_z]
    zf = 1.0 - events.sizes[events.is_z]
    yt = events.times[~events.is_z]
    ys = events.sizes[~events.is_z]
    out = np.empty(ts.size)
    for i, tt in enumerate(ts):
        m = int(np.searchsorted(zt, tt, side="right"))
        # suffix[k] = prod_{j >= k} factor_j over Z-events up to tt
        suffix = np.ones(m + 1)
        if m:
            suffix[:m] = np.cumprod(zf[:m][::-1])[::-1]
        val = x0 * math.exp(-c * tt) * suffix[0]
        ny = int(np.searchsorted(yt, tt, side="right"))
        if ny:
            u = yt[:ny]
            k = np.searchsorted(zt[:m], u, side="right")
            val += float(np.sum(ys[:ny] * np.exp(-c * (tt - u)) * suffix[k]))
        if r:
            edges = np.concatenate([[0.0], zt[:m], [tt]])
            d = np.diff(edges)
            seg = np.exp(-c * (tt - edges[1:])) * d * _phi1(c * d)
            val += r * float(np.sum(seg * suffix))
        out[i] = val
    return out if np.ndim(t) else float(out[0])


def residual_check(path: Path, events: EventStream, pair: DriverPair, n_grid: int = 100) -> float:
    """max |X_t - X_0 - Y_t + int_(0,t] X_{s-} dZ_s| over event times and a grid.

    The dZ integral is c * int X ds, closed form per segment, plus
    sum X_{s-} dZ_s over the Z-events.
    """
    if path.horizon != events.horizon:
        raise ValueError("path and events disagree on the horizon")
    if path.r != pair.y.drift or path.c != pair.z.drift:
        raise ValueError("path was not produced with this driver pair")
    expected = np.unique(events.times)
    if not np.array_equal(path.starts[1:], expected):
        raise ValueError("path segments do not match the event stream")
    r, c = path.r, path.c
    pts = np.union1d(np.linspace(0.0, path.horizon, n_grid), events.times)
    # c * int over each full segment
    ends = np.append(path.starts[1:], path.horizon)
    full = _flow_integral_c(path.values, r, c, ends - path.starts)
    cum = np.concatenate([[0.0], np.cumsum(full)])
    zt = events.times[events.is_z]
    zjump = path.left_limit(zt) * events.sizes[events.is_z] if zt.size else np.empty(0)
    zcum = np.concatenate([[0.0], np.cumsum(zjump)])
    yt = events.times[~events.is_z]
    ycum = np.concatenate([[0.0], np.cumsum(events.sizes[~events.is_z])])
    worst = 0.0
    for t in pts:
        i = int(np.searchsorted(path.starts, t, side="right") - 1)
        drift_int = cum[i] + _flow_integral_c(path.values[i], r, c, t - path.starts[i])
        jump_int = zcum[int(np.searchsorted(zt, t, side="right"))]
        y_t = r * t + ycum[int(np.searchsorted(yt, t, side="right"))]
        res = path(t) - path.x0 - y_t + drift_int + jump_int
        worst = max(worst, abs(float(res)))
    return worst


# -- Brownian-part Z on a grid --------------------------------------------------


@dataclass(frozen=True)
class GaussianZSpec:
    """Z = -a t + sigma B_t - (compound-Poisson jumps in (0, 1]), in the
    sign convention of X_t = Y_t + int X_{s-} dZ_s."""

    a: float
    sigma: float
    components: tuple[JumpComponent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")
        object.__setattr__(self, "components", tuple(self.components))
        for comp in self.components:
            if comp.dist.support_max > 1:
                raise SpecError("Z jumps must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class GouNoise:
    """Driving noise on a fine grid: Brownian increments and step-bucketed
    jump log-factors, shape (paths, steps)."""

    h: float
    dB: np.ndarray
    log_jump: np.ndarray

    def coarsen(self, m: int) -> "GouNoise":
        n = self.dB.shape[1]
        if n % m:
            raise ValueError("coarse step must be a multiple of the fine step")
        p = self.dB.shape[0]
        return GouNoise(
            self.h * m, self.dB.reshape(p, n // m, m).sum(2), self.log_jump.reshape(p, n // m, m).sum(2)
        )


def gou_noise(gz: GaussianZSpec, horizon: float, h: float, paths: int, rng: np.random.Generator) -> GouNoise:
    n = int(round(horizon / h))
    if n < 1 or abs(n * h - horizon) > 1e-9 * horizon:
        raise ValueError("step must divide the horizon")
    dB = rng.standard_normal((paths, n)) * math.sqrt(h)
    lj = np.zeros((paths, n))
    for comp in gz.components:
        cnt = rng.poisson(comp.rate * horizon, paths)
        rep = np.repeat(np.arange(paths), cnt)
        t = horizon * (1.0 - rng.random(rep.size))
        q = comp.dist.sample(rng, rep.size)
        # step k covers (kh, (k+1)h]
        k = np.minimum(np.ceil(t / h).astype(np.int64) - 1, n - 1)
        with np.errstate(divide="ignore"):
            np.add.at(lj, (rep, k), np.log1p(-q))
    return GouNoise(h, dB, lj)


def _step_factors(gz: GaussianZSpec, noise: GouNoise) -> np.ndarray:
    h = noise.h
    # exp(Z_t - Z_u - [Z,Z]^c/2) * prod (1 + dZ) exp(-dZ): the jump parts of
    # the exponent cancel, leaving prod (1 - q)
    return np.exp(-gz.a * h + gz.sigma * noise.dB - 0.5 * gz.sigma**2 * h + noise.log_jump)


def simulate_gou_discrete(
    r: float,
    gz: GaussianZSpec,
    x0: float,
    h: float,
    horizon: float,
    rng: np.random.Generator | None = None,
    paths: int = 1,
    noise: GouNoise | None = None,
):
    """Grid solution X_{k+1} = U_k (X_k + r h).

    U_k is the exact one-step factor; the dY integral over a step uses the
    left endpoint, which makes the scheme first order in ``h``.  Pass
    ``noise`` (on a grid that refines ``h``) to drive several step sizes
    with the same Brownian path.

    Returns
    -------
    grid : ndarray (steps + 1,)
    X : ndarray (paths, steps + 1)
    """
    if not h > 0:
        raise ValueError("step must be positive")
    if noise is None:
        if rng is None:
            raise ValueError("need rng or noise")
        noise = gou_noise(gz, horizon, h, paths, rng)
    elif not math.isclose(noise.h, h):
        noise = noise.coarsen(int(round(h / noise.h)))
    U = _step_factors(gz, noise)
    p, n = U.shape
    X = np.empty((p, n + 1))
    X[:, 0] = x0
    for k in range(n):
        X[:, k + 1] = U[:, k] * (X[:, k] + r * h)
    return np.arange(n + 1) * h, X


def gou_reference(r: float, gz: GaussianZSpec, x0: float, noise: GouNoise):
    """Trapezoidal evaluation of the representation on the noise's own grid.

    Used as the fine-grid reference for :func:`simulate_gou_discrete`.
    """
    U = _step_factors(gz, noise)
    h = noise.h
    p, n = U.shape
    X = np.empty((p, n + 1))
    X[:, 0] = x0
    for k in range(n):
        X[:, k + 1] = U[:, k] * X[:, k] + r * h * 0.5 * (U[:, k] + 1.0)
    return np.arange(n + 1) * h, X
