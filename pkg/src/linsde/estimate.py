"""
Monte-Carlo harness.

Replications run in fixed-size blocks (see :mod:`linsde.streams`), each
block with its own counter-based stream, so every estimate is a pure
function of (scenario, reps, seed) whatever the worker count.  Block
statistics are combined with a pairwise tree in block order.

Besides plain path averages this module implements the conditional
Laplace-transform estimator.  Given Z, the Levy-Y integral
int e^{-J_s} 1{N_s=0} dY_s has LST exp(-int eta_y(alpha e^{-J_s} 1{N_s=0}) ds),
so only Z needs simulating, with J the log-collapse process

    J_t = c_z t - sum_{s<=t, dZ_s<1} log(1 - dZ_s),   N_t = #{s<=t: dZ_s = 1}.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import streams
from .model import (
    DriverPair,
    JumpDistribution,
    SpecError,
    SubordinatorSpec,
    atom_rate_at_one,
    death_rates,
    exponent_derivatives_at_zero,
    validate_spec,
)
from .moments import ExpMixture, moment_curve, second_moment_curve, transient_mean_curve
from .pathsim import (
    EventBatch,
    _pad,
    _phi1,
    evolve_batch,
    sample_event_batch,
    sample_renewal_batch,
    stationary_excess_inverse,
)

__all__ = [
    "InitialLaw",
    "YMode",
    "Scenario",
    "Estimate",
    "MomentCell",
    "MomentReport",
    "OrderResult",
    "ComparisonTable",
    "scenario_block",
    "mc_sample",
    "mc_moments",
    "analytic_curves",
    "lst_samples",
    "plain_lst",
    "conditional_lst",
    "conditional_lst_derivative",
    "stationary_lst_mc",
    "stationary_mean_slope",
    "StationaryEstimate",
    "stochastic_order_check",
    "compare_report",
    "estimate_phi",
    "second_moment_from_z",
    "renewal_sample",
    "renewal_stationary_lst",
]

Z99 = stats.norm.ppf(0.995)


def _workers() -> int:
    env = os.environ.get("LINSDE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_blocks(fn: Callable, items: Sequence):
    """Apply ``fn`` to each item; results come back in item order."""
    w = min(_workers(), len(items))
    if w <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))


def _tree(items: list, combine: Callable):
    items = list(items)
    while len(items) > 1:
        nxt = [combine(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


# -- scenario ---------------------------------------------------------------------


@dataclass(frozen=True)
class InitialLaw:
    """X_0: a constant or an exponential with the given mean."""

    kind: str = "const"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "exp"):
            raise SpecError(f"unknown initial law {self.kind!r}")
        if self.kind == "exp" and not self.value > 0:
            raise SpecError("exponential initial law needs a positive mean")

    @property
    def mean(self) -> float:
        return self.value

    def lst(self, alpha):
        """xi_0(alpha) = E exp(-alpha X_0)."""
        a = np.asarray(alpha, dtype=float)
        if self.kind == "const":
            return np.exp(-a * self.value)
        return 1.0 / (1.0 + a * self.value)

    def sample(self, rng, size):
        if self.kind == "const":
            return np.full(size, self.value)
        return rng.exponential(self.value, size)


@dataclass(frozen=True)
class YMode:
    """``levy``: Y is the pair's y.  ``random-drift``: Y_t = y_t + V t with V
    drawn once per replication; stationary increments, not independent ones."""

    kind: str = "levy"
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("levy", "random-drift"):
            raise SpecError(f"unknown y mode {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if self.kind == "random-drift":
            if not self.values or len(self.values) != len(self.probs):
                raise SpecError("random drift needs matching values and probabilities")
            if any(v < 0 for v in self.values) or any(p < 0 for p in self.probs):
                raise SpecError("random drift values and probabilities must be nonnegative")
            if abs(sum(self.probs) - 1.0) > 1e-12:
                raise SpecError("random drift probabilities must sum to 1")

    @property
    def mean(self) -> float:
        return sum(v * p for v, p in zip(self.values, self.probs))


@dataclass(frozen=True)
class Scenario:
    pair: DriverPair
    x0: InitialLaw = field(default_factory=InitialLaw)
    horizon: float = 10.0
    t_grid: tuple[float, ...] = (1.0,)
    y_mode: YMode = field(default_factory=YMode)

    def __post_init__(self):
        validate_spec(self.pair)
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if not self.horizon > 0:
            raise SpecError("horizon must be positive")
        g = np.asarray(self.t_grid)
        if g.size and (np.any(np.diff(g) < 0) or g[0] < 0 or g[-1] > self.horizon):
            raise SpecError("t_grid must be sorted and inside [0, horizon]")

    @property
    def is_levy(self) -> bool:
        return self.y_mode.kind == "levy"

    @property
    def EY1(self) -> float:
        return self.pair.y.mean_rate() + (0.0 if self.is_levy else self.y_mode.mean)


def scenario_block(scn: Scenario, seed: int, block: int, purpose: int = streams.SIM, horizon=None):
    """Full block of replications: initial values, Y drifts and events.

    Draw order inside the block stream: X_0, random drift, events.
    """
    rng = streams.stream(seed, purpose, block)
    B = streams.BLOCK_SIZE
    x0 = scn.x0.sample(rng, B)
    r = np.full(B, scn.pair.y.drift)
    if not scn.is_levy:
        r = r + rng.choice(np.array(scn.y_mode.values), size=B, p=np.array(scn.y_mode.probs))
    batch = sample_event_batch(scn.pair, scn.horizon if horizon is None else horizon, B, rng)
    return x0, r, batch


def mc_sample(scn: Scenario, times, reps: int, seed: int, purpose: int = streams.SIM) -> np.ndarray:
    """X at ``times`` for replications 0..reps-1; shape (reps, len(times))."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    order = np.argsort(times, kind="stable")
    horizon = max(float(times.max()), 1e-300) if times.size else scn.horizon

    def run(item):
        b, n = item
        x0, r, batch = scenario_block(scn, seed, b, purpose, horizon)
        return evolve_batch(x0[:n], r[:n], scn.pair.z.drift, batch.take(np.arange(n)), times[order])

    out = np.concatenate(_map_blocks(run, streams.blocks(reps)), axis=0)
    res = np.empty_like(out)
    res[:, order] = out
    return res


# -- estimates and reports ---------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    var: float
    n: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "Estimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        var = float(x.var(ddof=1)) if n > 1 else 0.0
        return cls(float(x.mean()), math.sqrt(var / n), var, n)

    @property
    def ci_half(self) -> float:
        return Z99 * self.stderr


@dataclass(frozen=True)
class MomentCell:
    t: float
    n: int
    analytic: float | None
    mc: float
    stderr: float

    @property
    def ci_half(self) -> float:
        return Z99 * self.stderr

    @property
    def z(self) -> float | None:
        if self.analytic is None:
            return None
        return _zscore(self.mc, self.analytic, self.stderr)


def _zscore(mc, a, se):
    if se > 0:
        return (mc - a) / se
    return 0.0 if abs(mc - a) <= 1e-12 * (1 + abs(a)) else math.copysign(math.inf, mc - a)


@dataclass(frozen=True)
class MomentReport:
    cells: tuple[MomentCell, ...]
    reps: int
    seed: int

    def cell(self, t: float, n: int) -> MomentCell:
        for c in self.cells:
            if c.t == t and c.n == n:
                return c
        raise KeyError((t, n))

    def rows(self):
        header = ["t", "n", "analytic", "mc", "ci_half", "stderr", "z"]
        body = [[c.t, c.n, c.analytic, c.mc, c.ci_half, c.stderr, c.z] for c in self.cells]
        return header, body


def analytic_curves(scn: Scenario, n_max: int) -> dict[int, ExpMixture]:
    """Every moment curve with a closed form for this scenario."""
    z, y = scn.pair.z, scn.pair.y
    curves = {1: transient_mean_curve(scn.x0.mean, scn.EY1, z)}
    if z.is_zero or not scn.is_levy:
        return curves
    const_x0 = scn.x0.kind == "const"
    if y.is_pure_drift and const_x0 and scn.x0.value >= 0:
        for n in range(2, n_max + 1):
            curves[n] = moment_curve(scn.x0.value, n, z, y.drift)
    elif const_x0 and scn.x0.value == 0 and n_max >= 2:
        curves[2] = second_moment_curve(y, z)
    return {n: c for n, c in curves.items() if n <= n_max}


def _combine(a, b):
    na, ma, Ma = a
    nb, mb, Mb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * (nb / n), Ma + Mb + d * d * (na * nb / n)


def mc_moments(
    scn: Scenario,
    n_max: int,
    reps: int,
    seed: int,
    curves: Mapping[int, ExpMixture] | None = None,
) -> MomentReport:
    """Empirical E X_t^n, n <= n_max, at every grid time, with standard errors."""
    if reps < 100:
        raise ValueError("need at least 100 replications")
    grid = np.asarray(scn.t_grid)
    powers = np.arange(1, n_max + 1)

    def run(item):
        b, n = item
        x0, r, batch = scenario_block(scn, seed, b)
        X = evolve_batch(x0[:n], r[:n], scn.pair.z.drift, batch.take(np.arange(n)), grid)
        P = X[:, :, None] ** powers
        m = P.mean(axis=0)
        return n, m, ((P - m) ** 2).sum(axis=0)

    N, mean, M2 = _tree(_map_blocks(run, streams.blocks(reps)), _combine)
    se = np.sqrt(M2 / (N - 1) / N)
    curves = analytic_curves(scn, n_max) if curves is None else curves
    cells = []
    for j, t in enumerate(grid):
        for k, n in enumerate(powers):
            a = float(curves[n](t)) if n in curves else None
            cells.append(MomentCell(float(t), int(n), a, float(mean[j, k]), float(se[j, k])))
    return MomentReport(tuple(cells), reps, seed)


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[tuple, ...]  # (t, n, analytic, mc, stderr, z, passed)
    frac_over_3: float
    passed: bool

    header = ("t", "n", "analytic", "mc", "stderr", "z", "pass")

    @property
    def failures(self):
        return [r for r in self.rows if not r[-1]]


def compare_report(analytic, mc: MomentReport, z_cell: float = 4.0, z_family: float = 3.0, frac: float = 0.01):
    """Analytic-vs-MC table: a cell passes when |z| < 4; the table passes when
    every cell does and at most 1% of cells have |z| > 3.

    ``analytic`` maps order n to an :class:`ExpMixture`, or (t, n) to a value.
    """
    rows = []
    keys = {(c.t, c.n) for c in mc.cells}
    if analytic and all(isinstance(k, tuple) for k in analytic):
        missing = set(analytic) - keys
        if missing:
            raise ValueError(f"grid mismatch: no MC cell for {sorted(missing)}")
        lookup = lambda t, n: analytic.get((t, n))
    else:
        orders = {c.n for c in mc.cells}
        if set(analytic) - orders:
            raise ValueError("grid mismatch: analytic orders not in the MC report")
        lookup = lambda t, n: float(analytic[n](t)) if n in analytic else None
    for c in mc.cells:
        a = lookup(c.t, c.n)
        if a is None:
            continue
        z = _zscore(c.mc, a, c.stderr)
        rows.append((c.t, c.n, a, c.mc, c.stderr, z, abs(z) < z_cell))
    over = sum(abs(r[5]) > z_family for r in rows)
    fr = over / len(rows) if rows else 0.0
    ok = all(r[-1] for r in rows) and fr <= frac
    return ComparisonTable(tuple(rows), fr, ok)


# -- Z-only functionals ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _ZSegments:
    """Stretches of constant jump-part of J up to min(t, T_1), per row."""

    start: np.ndarray  # (R, S)
    length: np.ndarray  # (R, S)
    J0: np.ndarray  # J at segment start
    J_end: np.ndarray  # (R,) J at the end time
    alive: np.ndarray  # (R,) no total collapse up to the end time


def _z_segments(batch: EventBatch, c: float, t_end) -> _ZSegments:
    R = batch.size
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (R,))
    T, S, Zm = batch.times, batch.sizes, batch.is_z
    zmask = Zm & (T <= t_end[:, None])
    atom = zmask & (S >= 1.0)
    T1 = np.where(atom, T, np.inf).min(axis=1) if T.shape[1] else np.full(R, np.inf)
    end = np.minimum(t_end, T1)
    jm = zmask & ~atom & (T < end[:, None])
    # jump slots keep time order; push non-jumps to the back
    key = np.where(jm, T, np.inf)
    order = np.argsort(key, axis=1, kind="stable")
    bt = np.take_along_axis(key, order, axis=1)
    with np.errstate(divide="ignore"):
        lj = np.where(jm, -np.log1p(-np.where(jm, S, 0.0)), 0.0)
    lj = np.take_along_axis(lj, order, axis=1)
    starts = np.concatenate([np.zeros((R, 1)), bt], axis=1)
    starts = np.minimum(starts, end[:, None])
    ends = np.concatenate([bt, np.full((R, 1), np.inf)], axis=1)
    ends = np.minimum(ends, end[:, None])
    length = np.maximum(ends - starts, 0.0)
    jsum = np.concatenate([np.zeros((R, 1)), np.cumsum(lj, axis=1)], axis=1)
    J0 = c * starts + jsum
    J_end = c * t_end + jsum[:, -1]
    return _ZSegments(starts, length, J0, J_end, T1 > t_end)


_GL = {n: np.polynomial.legendre.leggauss(n) for n in (8, 16)}


def _gl(f, idx, a, b, n):
    x, w = _GL[n]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    s = mid[:, None] + half[:, None] * x
    return half * (f(np.repeat(idx, n).reshape(-1, n), s) * w).sum(axis=1)


def _adaptive_gl(f, idx, a, b, tol, max_depth=40):
    """Integrate f(idx, s) over [a, b] per row to absolute tolerance ``tol``.

    A panel is accepted when its 8- and 16-point rules agree to within the
    panel's share of the tolerance; otherwise it is bisected.
    """
    total = np.zeros(idx.size)
    pos = np.arange(idx.size)
    lo, hi, share = a.copy(), b.copy(), np.full(idx.size, tol)
    for _ in range(max_depth):
        if not pos.size:
            return total
        coarse = _gl(f, idx[pos], lo, hi, 8)
        fine = _gl(f, idx[pos], lo, hi, 16)
        ok = np.abs(fine - coarse) <= share
        np.add.at(total, pos[ok], fine[ok])
        bad = ~ok
        mid = 0.5 * (lo[bad] + hi[bad])
        pos = np.concatenate([pos[bad], pos[bad]])
        lo, hi = np.concatenate([lo[bad], mid]), np.concatenate([mid, hi[bad]])
        share = np.concatenate([share[bad], share[bad]]) / 2
    if pos.size:
        raise RuntimeError("adaptive quadrature did not converge")
    return total


def _eta_integral(y: SubordinatorSpec, alpha: float, seg: _ZSegments, c: float, tol: float) -> np.ndarray:
    """Per row: int over the segments of eta_y(alpha e^{-J_s}) ds."""
    L, J0 = seg.length, seg.J0
    base = alpha * np.exp(-J0)
    # drift part: r alpha int e^{-J} ds in closed form
    out = (y.drift * base * L * _phi1(c * L)).sum(axis=1)
    if not y.components or alpha == 0:
        return out
    live = L > 0
    if c == 0:
        return out + np.where(live, L * y.jump_exponent(base), 0.0).sum(axis=1)
    rows, cols = np.nonzero(live)
    j0 = J0[rows, cols]

    def f(i, s):
        return y.jump_exponent(alpha * np.exp(-j0[i] - c * s))

    vals = _adaptive_gl(f, np.arange(rows.size), np.zeros(rows.size), L[rows, cols], tol)
    np.add.at(out, rows, vals)
    return out


def _require_levy(scn: Scenario):
    if not scn.is_levy:
        raise SpecError("conditional estimator needs a Levy Y")


def _conditional_values(alpha: float, t: float, scn: Scenario, reps: int, seed: int, quad_tol: float):
    c = scn.pair.z.drift

    def run(item):
        b, n = item
        _, _, batch = scenario_block(scn, seed, b, horizon=max(t, 1e-300))
        seg = _z_segments(batch.take(np.arange(n)), c, t)
        I = _eta_integral(scn.pair.y, alpha, seg, c, quad_tol)
        arg = np.where(seg.alive, alpha * np.exp(-seg.J_end), 0.0)
        return scn.x0.lst(arg) * np.exp(-I)

    return np.concatenate(_map_blocks(run, streams.blocks(reps)))


def lst_samples(alpha: float, t: float, scn: Scenario, reps: int, seed: int, conditional: bool, quad_tol: float = 1e-10):
    """Per-replication values behind :func:`plain_lst` or :func:`conditional_lst`
    (same streams for the same seed)."""
    if conditional:
        _require_levy(scn)
        return _conditional_values(alpha, t, scn, reps, seed, quad_tol)
    return np.exp(-alpha * mc_sample(scn, [t], reps, seed)[:, 0])


def plain_lst(alpha: float, t: float, scn: Scenario, reps: int, seed: int) -> Estimate:
    """Average of exp(-alpha X_t) over full simulated paths."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return Estimate(1.0, 0.0, 0.0, reps)
    X = mc_sample(scn, [t], reps, seed)[:, 0]
    return Estimate.from_samples(np.exp(-alpha * X))


def conditional_lst(
    alpha: float, t: float, scn: Scenario, reps: int, seed: int, quad_tol: float = 1e-10
) -> Estimate:
    """E exp(-alpha X_t) averaged over Z only:

    xi_0(alpha e^{-J_t} 1{N_t=0}) exp(-int_0^t eta_y(alpha e^{-J_s}) 1{N_s=0} ds).

    Uses the same streams as :func:`plain_lst` for the same seed, so the
    Z-paths are shared between the two.
    """
    _require_levy(scn)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return Estimate(1.0, 0.0, 0.0, reps)
    return Estimate.from_samples(_conditional_values(alpha, t, scn, reps, seed, quad_tol))


def conditional_lst_derivative(t: float, scn: Scenario, reps: int, seed: int, h: float = 1e-4) -> Estimate:
    """-d/dalpha of the conditional LST at 0, i.e. an estimate of E X_t.

    One-sided second-order difference (-3 F(0) + 4 F(h) - F(2h)) / (2h)
    per replication with common Z-paths; F(0) = 1.
    """
    _require_levy(scn)
    f1 = _conditional_values(h, t, scn, reps, seed, 1e-13)
    f2 = _conditional_values(2 * h, t, scn, reps, seed, 1e-13)
    return Estimate.from_samples(-(-3.0 + 4.0 * f1 - f2) / (2 * h))


@dataclass(frozen=True)
class StationaryEstimate(Estimate):
    truncated: bool = False
    truncation_bound: float = 0.0


def _without_atoms(z: SubordinatorSpec) -> SubordinatorSpec:
    comps = tuple(c for c in z.components if not (c.dist.kind == "point" and c.dist.scale == 1.0))
    return SubordinatorSpec(z.drift, comps)


def _stationary_values(alpha, scn, reps, seed, trunc_horizon, quad_tol):
    z = scn.pair.z
    lam = atom_rate_at_one(z)
    zr = _without_atoms(z)
    zpair = DriverPair(SubordinatorSpec(), zr)
    c = z.drift
    mu1 = death_rates(z, 1)[0]
    dy1 = exponent_derivatives_at_zero(scn.pair.y, 1)[0]

    def run(item):
        b, n = item
        rng = streams.stream(seed, streams.STATIONARY, b)
        B = streams.BLOCK_SIZE
        H = rng.exponential(1.0 / lam, B) if lam > 0 else np.full(B, float(trunc_horizon))
        batch = sample_event_batch(zpair, np.maximum(H, 1e-300), B, rng).take(np.arange(n))
        seg = _z_segments(batch, c, H[:n])
        I = _eta_integral(scn.pair.y, alpha, seg, c, quad_tol)
        # eta_y(u) <= eta_y'(0) u, and E int_T^inf e^{-(J_s - J_T)} ds = 1/eta_j(1)
        bound = dy1 * alpha * np.exp(-seg.J_end) / mu1
        return np.exp(-I), bound

    res = _map_blocks(run, streams.blocks(reps))
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res]), lam


def stationary_lst_mc(
    alpha: float, scn: Scenario, reps: int, seed: int, trunc_horizon: float = 50.0, quad_tol: float = 1e-10
) -> StationaryEstimate:
    """E exp(-int_0^{T_1} eta_y(alpha e^{-J_s}) ds), the LST of the limit law.

    With total collapses (rate lambda > 0) T_1 ~ Exp(lambda) is drawn
    exactly.  Otherwise the integral is cut at ``trunc_horizon`` and the
    mean of eta_y'(0) alpha e^{-J_trunc} / eta_j(1), an upper bound for the
    expected missing exponent, is reported.
    """
    _require_levy(scn)
    if scn.pair.z.is_zero:
        raise SpecError("zero Z has no stationary regime")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return StationaryEstimate(1.0, 0.0, 0.0, reps)
    vals, bound, lam = _stationary_values(alpha, scn, reps, seed, trunc_horizon, quad_tol)
    e = Estimate.from_samples(vals)
    trunc = lam == 0
    return StationaryEstimate(e.mean, e.stderr, e.var, e.n, trunc, float(bound.mean()) if trunc else 0.0)


def stationary_mean_slope(scn: Scenario, reps: int, seed: int, h: float = 1e-4, trunc_horizon: float = 50.0):
    """-d/dalpha at 0 of the stationary LST (the stationary mean), per-replication
    second-order one-sided difference on common Z-paths."""
    f1, _, _ = _stationary_values(h, scn, reps, seed, trunc_horizon, 1e-13)
    f2, _, _ = _stationary_values(2 * h, scn, reps, seed, trunc_horizon, 1e-13)
    return Estimate.from_samples(-(-3.0 + 4.0 * f1 - f2) / (2 * h))


# -- stochastic order --------------------------------------------------------------


@dataclass(frozen=True)
class OrderResult:
    passed: bool
    max_violation: float
    eps: float


def stochastic_order_check(
    scn: Scenario, t1: float, t2: float, reps: int, seed: int, delta: float = 0.01
) -> OrderResult:
    """Check X_{t1} <=st X_{t2} from independent samples.

    Passes iff F_{t2}(x) <= F_{t1}(x) + 2 eps for every x, with the DKW
    radius eps = sqrt(log(2/delta) / (2 reps)).
    """
    if scn.x0.kind != "const" or scn.x0.value != 0:
        raise ValueError("stochastic monotonicity holds for X_0 = 0")
    eps = math.sqrt(math.log(2 / delta) / (2 * reps))
    if t1 == t2:
        return OrderResult(True, 0.0, eps)
    a = np.sort(mc_sample(scn, [t1], reps, seed, streams.ORDER_A)[:, 0])
    b = np.sort(mc_sample(scn, [t2], reps, seed, streams.ORDER_B)[:, 0])
    pts = np.union1d(a, b)
    Fa = np.searchsorted(a, pts, side="right") / a.size
    Fb = np.searchsorted(b, pts, side="right") / b.size
    viol = float(np.max(Fb - Fa))
    return OrderResult(viol <= 2 * eps, max(viol, 0.0), eps)


# -- Z-only checks of the moment formulas ---------------------------------------


def estimate_phi(scn: Scenario, grid, reps: int, seed: int):
    """E exp(-J_s) 1{N_s = 0} on ``grid``; returns (mean, 99% half-width)."""
    grid = np.asarray(grid, dtype=float)
    c = scn.pair.z.drift

    def run(item):
        b, n = item
        _, _, batch = scenario_block(scn, seed, b, horizon=max(grid.max(), 1e-300))
        batch = batch.take(np.arange(n))
        T, S, Zm = batch.times, batch.sizes, batch.is_z
        with np.errstate(divide="ignore"):
            lj = np.where(Zm, -np.log1p(-np.where(Zm, S, 0.0)), 0.0)
        out = np.empty((n, grid.size))
        for j, s in enumerate(grid):
            m = Zm & (T <= s)
            dead = (m & (S >= 1.0)).any(axis=1)
            J = c * s + np.where(m & (S < 1.0), lj, 0.0).sum(axis=1)
            out[:, j] = np.where(dead, 0.0, np.exp(-J))
        return out

    V = np.concatenate(_map_blocks(run, streams.blocks(reps)), axis=0)
    se = V.std(axis=0, ddof=1) / math.sqrt(reps)
    return V.mean(axis=0), Z99 * se


def second_moment_from_z(scn: Scenario, t: float, reps: int, seed: int) -> Estimate:
    """eta_y'(0)^2 (int_0^t e^{-J}1 ds)^2 - eta_y''(0) int_0^t e^{-2J}1 ds, averaged
    over Z-paths; estimates E X_t^2 for X_0 = 0 and Levy Y."""
    _require_levy(scn)
    dy1, dy2 = exponent_derivatives_at_zero(scn.pair.y, 2)
    c = scn.pair.z.drift

    def run(item):
        b, n = item
        _, _, batch = scenario_block(scn, seed, b, horizon=max(t, 1e-300))
        seg = _z_segments(batch.take(np.arange(n)), c, t)
        L = seg.length
        I1 = (np.exp(-seg.J0) * L * _phi1(c * L)).sum(axis=1)
        I2 = (np.exp(-2 * seg.J0) * L * _phi1(2 * c * L)).sum(axis=1)
        return dy1 * dy1 * I1 * I1 - dy2 * I2

    return Estimate.from_samples(np.concatenate(_map_blocks(run, streams.blocks(reps))))


# -- renewal collapses -------------------------------------------------------------


def _merge_batches(a: EventBatch, b: EventBatch) -> EventBatch:
    R = a.size
    rep, t, s, z = [], [], [], []
    for e in (a, b):
        m = np.isfinite(e.times)
        rr, _ = np.nonzero(m)
        rep.append(rr)
        t.append(e.times[m])
        s.append(e.sizes[m])
        z.append(e.is_z[m])
    return _pad(R, np.concatenate(rep), np.concatenate(t), np.concatenate(s), np.concatenate(z), a.horizon)


def renewal_sample(
    y: SubordinatorSpec,
    z: SubordinatorSpec,
    law: JumpDistribution,
    t: float,
    reps: int,
    seed: int,
    x0: float = 0.0,
    stationary: bool = True,
) -> np.ndarray:
    """X_t when total collapses come from a (stationary) renewal process
    with inter-renewal ``law`` on top of the Levy pair (y, z)."""
    pair = validate_spec(DriverPair(y, z))

    def run(item):
        b, n = item
        rng = streams.stream(seed, streams.RENEWAL, b)
        B = streams.BLOCK_SIZE
        ren = sample_renewal_batch(law, t, B, rng, stationary)
        ev = sample_event_batch(pair, t, B, rng)
        batch = _merge_batches(ev, ren).take(np.arange(n))
        return evolve_batch(x0, y.drift, z.drift, batch, [t])[:, 0]

    return np.concatenate(_map_blocks(run, streams.blocks(reps)))


def renewal_stationary_lst(
    alpha: float,
    y: SubordinatorSpec,
    z: SubordinatorSpec,
    law: JumpDistribution,
    reps: int,
    seed: int,
    n_quad: int = 400,
    quad_tol: float = 1e-10,
):
    """Limit LST when N is a stationary renewal process independent of J.

    Two estimates of E exp(-int_0^{T_1} eta_y(alpha e^{-J_s}) ds):

    * ``direct``: T_1 drawn from the stationary-excess law.
    * ``excess_integral``: int_0^inf G(t) f_e(t) dt with
      G(t) = E exp(-int_0^t eta_y(alpha e^{-J_s}) ds) estimated on a t-grid
      from shared J-paths, f_e = (1 - F)/mean, trapezoid in t.

    ``z`` must not contain total collapses; those come from the renewal law.
    """
    if atom_rate_at_one(z):
        raise SpecError("total collapses come from the renewal law here")
    zpair = DriverPair(SubordinatorSpec(), z)
    c = z.drift
    mean = law.moment(1)
    # support of f_e
    tmax = float(stationary_excess_inverse(law, np.array([1.0 - 1e-12]))[0])
    grid = np.linspace(0.0, tmax, n_quad + 1)
    fe = (1.0 - law.cdf(grid)) / mean

    def run(item):
        b, n = item
        rng = streams.stream(seed, streams.RENEWAL, b)
        B = streams.BLOCK_SIZE
        T1 = stationary_excess_inverse(law, 1.0 - rng.random(B))
        batch = sample_event_batch(zpair, tmax, B, rng).take(np.arange(n))
        direct = np.exp(-_eta_integral(y, alpha, _z_segments(batch, c, T1[:n]), c, quad_tol))
        G = np.empty((n, grid.size))
        for j, g in enumerate(grid):
            G[:, j] = np.exp(-_eta_integral(y, alpha, _z_segments(batch, c, g), c, quad_tol))
        return direct, G @ (_trap_weights(grid) * fe)

    res = _map_blocks(run, streams.blocks(reps))
    return (
        Estimate.from_samples(np.concatenate([r[0] for r in res])),
        Estimate.from_samples(np.concatenate([r[1] for r in res])),
    )


def _trap_weights(grid):
    w = np.zeros_like(grid)
    d = np.diff(grid)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w
