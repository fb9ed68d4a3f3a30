"""
Closed-form transient and stationary moments.

Transient moment curves are returned as :class:`ExpMixture` objects, i.e.
finite sums ``c * t^p * exp(-rho t)``.  Powers p > 0 only appear when
death rates tie (clearing-type Z) or in the tied branch of the second
moment.

The n-th moment for linear Y (Y_t = r t, X_0 = x) is written through a
pure-death chain on {0, ..., n} with rates mu_i:

    E X_t^n = n! / prod mu_i * (p_{n0}(t) + sum_k x^k prod_{i<=k} mu_i / k! p_{nk}(t))

(x in units of r, result scaled by r^n).  The transition row is computed
by uniformization, which is indifferent to tied rates; the partial
fraction form and the simplex recursion ``f_n`` serve as independent
routes.
"""
from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, pdtrc

from .model import SpecError, SubordinatorSpec, death_rates, exponent_derivatives_at_zero

__all__ = [
    "ExpMixture",
    "DeathModel",
    "TiesError",
    "transient_mean",
    "transient_mean_curve",
    "transient_mean_numeric",
    "transient_second_moment",
    "second_moment_curve",
    "stationary_second_moment",
    "death_transition_row",
    "death_transition_row_pf",
    "hypoexp_cdf_mixture",
    "moment_linear_growth",
    "moment_curve",
    "DeathChainCurve",
    "SecondMomentCurve",
    "simplex_recursion",
    "simplex_g",
    "moment_via_simplex",
    "moment_at_exponential_time",
    "laplace_of_mixture",
    "MAX_ORDER",
]

MAX_ORDER = 12
MERGE_TOL = 1e-12
TIE_TOL = 1e-6
UNIFORMIZATION_TAIL = 1e-13
# working precision of the simplex recursions; gaps down to TIE_TOL cost
# at most ~6n digits
SIMPLEX_DIGITS = 80
_SIMPLEX_CTX = decimal.Context(prec=SIMPLEX_DIGITS)


class TiesError(ValueError):
    """Simplex recursion refused: arguments (or their gaps) too close to zero."""


@dataclass(frozen=True)
class ExpMixture:
    """f(t) = sum c_i t^{p_i} exp(-rho_i t).

    ``terms`` holds (coefficient, rate, power) triples, merged so that each
    (rate, power) pair appears once.  Coefficients are kept as exact
    rationals: partial-fraction coefficients of nearby rates are huge and
    cancel, and exact arithmetic confines rounding to the final float.
    """

    terms: tuple[tuple[Fraction, float, int], ...]

    def __post_init__(self):
        merged: list[list] = []
        for c, rho, p in sorted(self.terms, key=lambda x: (x[1], x[2])):
            if rho < 0:
                raise ValueError("mixture rates must be nonnegative")
            if merged and merged[-1][2] == p and abs(merged[-1][1] - rho) <= MERGE_TOL:
                merged[-1][0] += Fraction(c)
            else:
                merged.append([Fraction(c), float(rho), int(p)])
        object.__setattr__(self, "terms", tuple((c, r, p) for c, r, p in merged if c != 0))

    @classmethod
    def constant(cls, c: float) -> "ExpMixture":
        return cls(((c, 0.0, 0),))

    @classmethod
    def from_pairs(cls, pairs) -> "ExpMixture":
        return cls(tuple((c, r, 0) for c, r in pairs))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, rho, p in self.terms:
            out = out + float(c) * t**p * np.exp(-rho * t)
        return out if out.ndim else float(out)

    def __add__(self, other: "ExpMixture") -> "ExpMixture":
        return ExpMixture(self.terms + other.terms)

    def __sub__(self, other: "ExpMixture") -> "ExpMixture":
        return self + other.scale(-1)

    def scale(self, a) -> "ExpMixture":
        a = Fraction(a)
        return ExpMixture(tuple((a * c, r, p) for c, r, p in self.terms))

    def laplace(self, theta: float) -> float:
        return laplace_of_mixture(self, theta)

    def limit(self) -> float:
        """Value as t -> infinity: the constant term, or +-inf if a
        rate-0 power term grows."""
        grow = [(p, c) for c, r, p in self.terms if r == 0 and p > 0]
        if grow:
            return math.copysign(math.inf, max(grow)[1])
        return float(sum(c for c, r, p in self.terms if r == 0 and p == 0))

    def to_dict(self) -> dict:
        return {"terms": [{"coef": float(c), "rate": r, "power": p} for c, r, p in self.terms]}


def laplace_of_mixture(m: ExpMixture, theta: float) -> float:
    """int_0^inf exp(-theta t) f(t) dt = sum c p! / (theta + rho)^{p+1}, summed exactly."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    th = Fraction(theta)
    total = Fraction(0)
    for c, rho, p in m.terms:
        s = th + Fraction(rho)
        if s <= 0:
            raise ValueError("theta + rate must be positive")
        total += c * math.factorial(p) / s ** (p + 1)
    return float(total)


@dataclass(frozen=True)
class DeathModel:
    """Pure-death chain on {0..n}: state i -> i-1 at rate ``rates[i-1]``."""

    rates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(x) for x in self.rates))
        if not self.rates or any(not m > 0 for m in self.rates):
            raise SpecError("death rates must be positive")

    @property
    def n(self) -> int:
        return len(self.rates)

    @classmethod
    def from_z(cls, z: SubordinatorSpec, n: int) -> "DeathModel":
        return cls(tuple(death_rates(z, n)))


# -- mean -----------------------------------------------------------------------


def transient_mean_curve(EX0: float, EY1: float, z: SubordinatorSpec) -> ExpMixture:
    m = z.mean_rate()
    if m == 0:
        return ExpMixture(((EX0, 0.0, 0), (EY1, 0.0, 1)))
    return ExpMixture(((EY1 / m, 0.0, 0), (EX0 - EY1 / m, m, 0)))


def transient_mean(EX0: float, EY1: float, z: SubordinatorSpec, t):
    """EX_t = EX_0 e^{-m t} + (EY_1/m)(1 - e^{-m t}), m = EZ_1."""
    m = z.mean_rate()
    t = np.asarray(t, dtype=float)
    if m == 0:
        out = EX0 + EY1 * t
    else:
        out = EX0 * np.exp(-m * t) - EY1 * np.expm1(-m * t) / m
    return out if out.ndim else float(out)


def transient_mean_numeric(EX0: float, EY1: float, grid, phi, t: float, phi_halfwidth=None):
    """Mean from a tabulated phi(s) = E exp(-J_s) 1{N_s = 0}.

    EX_t = EX_0 phi(t) + EY_1 int_0^t phi(s) ds with the trapezoid rule on
    the part of ``grid`` inside [0, t].  Half-widths of phi, if given,
    propagate linearly.

    Returns
    -------
    value, halfwidth : float, float
    """
    grid = np.asarray(grid, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if grid[0] > 0 or grid[-1] < t or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing and cover [0, t]")
    hw = np.zeros_like(phi) if phi_halfwidth is None else np.asarray(phi_halfwidth, dtype=float)
    k = int(np.searchsorted(grid, t, side="right"))
    g, p, w = grid[:k], phi[:k], hw[:k]
    if g[-1] < t:
        # linear interpolation up to t
        a = (t - g[-1]) / (grid[k] - g[-1])
        g = np.append(g, t)
        p = np.append(p, (1 - a) * phi[k - 1] + a * phi[k])
        w = np.append(w, (1 - a) * hw[k - 1] + a * hw[k])
    integral = float(np.trapezoid(p, g))
    val = EX0 * p[-1] + EY1 * integral
    half = abs(EX0) * w[-1] + abs(EY1) * float(np.trapezoid(w, g))
    return val, half


# -- second moment ---------------------------------------------------------------


def second_moment_curve(y: SubordinatorSpec, z: SubordinatorSpec) -> "SecondMomentCurve":
    """E X_t^2 for X_0 = 0 and independent Levy Y, Z.

    With mu1 = eta_z'(0), mu2 = 2 eta_z'(0) + eta_z''(0):

        2 eta_y'^2 (h(mu1) - h(mu2)) / (mu2 - mu1) - eta_y'' h(mu2),
        h(mu) = (1 - e^{-mu t}) / mu.

    For mu2 == mu1 the divided difference becomes -h'(mu1), which brings a
    t e^{-mu1 t} term.
    """
    if z.is_zero:
        raise SpecError("second moment needs a nonzero Z")
    dy1, dy2 = exponent_derivatives_at_zero(y, 2)
    dz1, dz2 = exponent_derivatives_at_zero(z, 2)
    mu1, mu2 = dz1, 2 * dz1 + dz2
    gap = mu2 - mu1
    A = 2 * dy1 * dy1
    h2 = ExpMixture(((1 / mu2, 0.0, 0), (-1 / mu2, mu2, 0)))
    if abs(gap) <= MERGE_TOL * max(1.0, mu1):
        # -d/dmu (1 - e^{-mu t})/mu = (1 - e^{-mu t})/mu^2 - t e^{-mu t}/mu
        dd = ExpMixture(((1 / mu1**2, 0.0, 0), (-1 / mu1**2, mu1, 0), (-1 / mu1, mu1, 1)))
    else:
        h1 = ExpMixture(((1 / mu1, 0.0, 0), (-1 / mu1, mu1, 0)))
        dd = (h1 - h2).scale(1 / gap)
    curve = dd.scale(A) + h2.scale(-dy2)
    return SecondMomentCurve(curve.terms, z, float(dy1), float(dy2), float(mu2))


def transient_second_moment(y: SubordinatorSpec, z: SubordinatorSpec, t):
    return second_moment_curve(y, z)(t)


def stationary_second_moment(y: SubordinatorSpec, z: SubordinatorSpec) -> float:
    """(2 eta_y'^2 - eta_z' eta_y'') / (eta_z' (2 eta_z' + eta_z''))."""
    if z.is_zero:
        raise SpecError("no stationary regime for a zero Z")
    dy1, dy2 = exponent_derivatives_at_zero(y, 2)
    dz1, dz2 = exponent_derivatives_at_zero(z, 2)
    den = dz1 * (2 * dz1 + dz2)
    if not den > 0:
        raise SpecError("nonpositive denominator in the stationary second moment")
    return (2 * dy1 * dy1 - dz1 * dy2) / den


# -- pure death chain ------------------------------------------------------------


def _rates(model) -> np.ndarray:
    if isinstance(model, DeathModel):
        return np.array(model.rates)
    return np.asarray(model, dtype=float)


def death_transition_row(model, start: int, t: float) -> np.ndarray:
    """[p_{start,0}(t), ..., p_{start,start}(t)] by uniformization.

    The Poisson series is cut once its remaining tail is below 1e-13.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    mu = _rates(model)
    if start < 0 or start > mu.size:
        raise ValueError("start state outside the chain")
    row = np.zeros(start + 1)
    row[start] = 1.0
    if start == 0 or t == 0:
        return row
    mu = mu[:start]
    lam = float(mu.max())
    m = lam * t
    if m == 0.0:
        return row
    stay = 1.0 - mu / lam  # self-loop probability in states 1..start
    move = mu / lam
    K = int(math.ceil(m + 10 * math.sqrt(m) + 20))
    while pdtrc(K, m) > UNIFORMIZATION_TAIL:
        K *= 2
    out = np.zeros(start + 1)
    v = row
    logm = math.log(m)
    for k in range(K + 1):
        w = math.exp(-m + k * logm - gammaln(k + 1))
        out += w * v
        nv = np.empty_like(v)
        nv[0] = v[0] + move[0] * v[1]
        nv[1:-1] = stay[:-1] * v[1:-1] + move[1:] * v[2:]
        nv[-1] = stay[-1] * v[-1]
        v = nv
    return np.clip(out, 0.0, 1.0)


def _group(rates: Sequence[float]) -> list[tuple[float, int]]:
    groups: list[list] = []
    for r in sorted(rates):
        if groups and abs(groups[-1][0] - r) <= MERGE_TOL:
            groups[-1][1] += 1
        else:
            groups.append([r, 1])
    return [(r, m) for r, m in groups]


def hypoexp_cdf_mixture(rates: Sequence[float]) -> ExpMixture:
    """CDF of sum_i E_i / rates_i (E_i iid Exp(1)) as an exponential mixture.

    Partial fractions of prod (rho/(s+rho))^m; repeated rates give
    polynomial-times-exponential terms.  An empty rate list is the
    constant 1.
    """
    if not len(rates):
        return ExpMixture.constant(1.0)
    groups = [(Fraction(r), m) for r, m in _group(rates)]
    terms = [(1, 0.0, 0)]
    for g, (rho, mg) in enumerate(groups):
        others = [(r, m) for h, (r, m) in enumerate(groups) if h != g]
        s = -rho
        # G(s) = rho^mg prod_h (r_h/(s+r_h))^m_h and its derivatives via G' = G L
        G = [rho**mg * math.prod(((r / (s + r)) ** m for r, m in others), start=Fraction(1))]
        Ld = [
            -sum((m * (-1) ** k * math.factorial(k) / (s + r) ** (k + 1) for r, m in others), Fraction(0))
            for k in range(mg)
        ]
        for nd in range(1, mg):
            G.append(sum((math.comb(nd - 1, k) * G[nd - 1 - k] * Ld[k] for k in range(nd)), Fraction(0)))
        for l in range(1, mg + 1):
            A = G[mg - l] / math.factorial(mg - l)
            # density term A t^{l-1} e^{-rho t}/(l-1)!; its integral from 0 to t is
            # A/rho^l (1 - e^{-rho t} sum_{j<l} (rho t)^j / j!)
            for j in range(l):
                terms.append((-A / rho**l * rho**j / math.factorial(j), float(rho), j))
    return ExpMixture(tuple(terms))


def death_transition_row_pf(model, start: int, t: float) -> np.ndarray:
    """Same row through hypoexponential partial fractions (oracle route).

    p_{start,k}(t) = H_{k+1..start}(t) - H_{k..start}(t), H_S the CDF of
    sum_{i in S} E_i/mu_i.  Ill-conditioned when rates nearly tie.
    """
    mu = list(_rates(model)[:start])
    row = np.empty(start + 1)
    for k in range(start + 1):
        upper = hypoexp_cdf_mixture(mu[k:])(t)
        lower = hypoexp_cdf_mixture(mu[k - 1 :])(t) if k >= 1 else 0.0
        row[k] = upper - lower
    return row


def _check_order(n: int, max_order: int):
    if n < 1:
        raise ValueError("moment order must be >= 1")
    if n > max_order:
        raise ValueError(f"moment order {n} exceeds the configured maximum {max_order}")


def moment_linear_growth(
    x: float, n: int, t: float, z: SubordinatorSpec, r: float = 1.0, max_order: int = MAX_ORDER
) -> float:
    """E X_t^n for Y_t = r t, X_0 = x >= 0, via the death-chain row."""
    _check_order(n, max_order)
    if x < 0:
        raise ValueError("initial value must be nonnegative")
    mu = np.array(death_rates(z, n))
    if r == 0:
        return x**n * math.exp(-mu[n - 1] * t)
    if not r > 0:
        raise ValueError("growth rate must be positive")
    xs = x / r
    row = death_transition_row(mu, n, t)
    acc = row[0]
    prod = 1.0
    for k in range(1, n + 1):
        prod *= xs * mu[k - 1] / k
        acc += prod * row[k]
    return math.factorial(n) / float(np.prod(mu)) * acc * r**n


@dataclass(frozen=True)
class DeathChainCurve(ExpMixture):
    """Moment curve of the linear-growth model.

    ``terms`` hold the exact mixture (used for transforms and dumps);
    evaluation goes through the death-chain row, because death rates that
    cluster (as they do for fractional collapses) give partial-fraction
    coefficients far beyond what a float sum can cancel.
    """

    x: float = 0.0
    n: int = 1
    z: SubordinatorSpec | None = None
    r: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array([moment_linear_growth(self.x, self.n, float(s), self.z, self.r) for s in t.ravel()])
        out = out.reshape(t.shape)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class SecondMomentCurve(ExpMixture):
    """Second-moment curve for Levy Y.

    ``terms`` hold the exact mixture; evaluation takes the divided
    difference from the death-chain row, since small death rates make
    the mixture terms cancel.
    """

    z: SubordinatorSpec | None = None
    dy1: float = 0.0
    dy2: float = 0.0
    mu2: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        dd = np.array([moment_linear_growth(0.0, 2, float(s), self.z) for s in t.ravel()]) / 2
        h2 = -np.expm1(-self.mu2 * t.ravel()) / self.mu2
        out = (2 * self.dy1**2 * dd - self.dy2 * h2).reshape(t.shape)
        return out if out.ndim else float(out)


def moment_curve(
    x: float, n: int, z: SubordinatorSpec, r: float = 1.0, max_order: int = MAX_ORDER
) -> DeathChainCurve:
    """The same moment as an exact exponential mixture in t."""
    _check_order(n, max_order)
    mu = death_rates(z, n)
    if r == 0:
        curve = ExpMixture(((x**n, mu[n - 1], 0),))
    else:
        xs = x / r
        curve = hypoexp_cdf_mixture(mu)
        prod = 1.0
        for k in range(1, n + 1):
            prod *= xs * mu[k - 1] / k
            if prod:
                pk = hypoexp_cdf_mixture(mu[k:]) - hypoexp_cdf_mixture(mu[k - 1 :])
                curve = curve + pk.scale(prod)
        curve = curve.scale(math.factorial(n) / math.prod(mu) * r**n)
    return DeathChainCurve(curve.terms, float(x), int(n), z, float(r))


# -- simplex recursion ---------------------------------------------------------


def simplex_recursion(a: Sequence[float]) -> float:
    """f_n(a) = integral over the unit simplex of exp(-sum a_i x_i).

    Evaluated by f_n(a) = (f_{n-1}(a_2..a_n) - e^{-a_1} f_{n-1}(a_2-a_1, ..)) / a_1
    after sorting (f_n is symmetric), with f_0 = 1.  The recursion is a
    divided difference of exp and cancels badly when the arguments are
    small, so it runs in decimal arithmetic with ``SIMPLEX_DIGITS`` digits.

    Raises
    ------
    TiesError
        If the smallest argument is within 1e-6 of zero or a gap between
        sorted arguments is below 1e-6; the recursion divides by these.
        Negative arguments are fine (the integral form covers them).  Use the uniformization route
        instead.
    """
    a = tuple(sorted(float(v) for v in a))
    if a and (abs(a[0]) < TIE_TOL or any(b - c < TIE_TOL for c, b in zip(a, a[1:]))):
        raise TiesError("simplex recursion needs well separated positive arguments")
    with decimal.localcontext(_SIMPLEX_CTX):
        return float(_f(tuple(Decimal(v) for v in a)))


@lru_cache(maxsize=4096)
def _f(a: tuple[Decimal, ...]) -> Decimal:
    if not a:
        return Decimal(1)
    a1 = a[0]
    rest = a[1:]
    shifted = tuple(v - a1 for v in rest)
    return (_f(rest) - (-a1).exp() * _f(shifted)) / a1


def simplex_g(b: Sequence[float]) -> float:
    """g_n(b) = f_n(b_1, b_1+b_2, ..., b_1+..+b_n) by its own recursion, g_0 = 1."""
    b = tuple(float(v) for v in b)
    if any(v < TIE_TOL for v in b):
        raise TiesError("g recursion needs increments above 1e-6")
    with decimal.localcontext(_SIMPLEX_CTX):
        return float(_g(tuple(Decimal(v) for v in b)))


@lru_cache(maxsize=4096)
def _g(b: tuple[Decimal, ...]) -> Decimal:
    if not b:
        return Decimal(1)
    b1 = b[0]
    head = (b1 + b[1],) + b[2:] if len(b) > 1 else ()
    return (_g(head) - (-b1).exp() * _g(b[1:])) / b1


def moment_via_simplex(n: int, t: float, z: SubordinatorSpec) -> float:
    """E X_t^n = t^n n! f_n(mu_1 t, ..., mu_n t) for X_0 = 0, r = 1."""
    mu = death_rates(z, n)
    return t**n * math.factorial(n) * simplex_recursion([m * t for m in mu])


# -- exponential horizon --------------------------------------------------------


def moment_at_exponential_time(x: float, n: int, theta: float, model, r: float = 1.0) -> float:
    """E X_T^n for T ~ Exp(theta) independent of everything, Y_t = r t, X_0 = x."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    mu = _rates(model)[:n]
    if mu.size < n:
        raise ValueError("death model shorter than the moment order")
    ratio = mu / (mu + theta)
    xs = x / r

    def tail(k):  # prod_{i=k}^n mu_i/(mu_i+theta), 1-based, empty = 1
        return float(np.prod(ratio[k - 1 :]))

    acc = tail(1)
    prod = 1.0
    for k in range(1, n + 1):
        prod *= xs * mu[k - 1] / k
        acc += prod * (tail(k + 1) - tail(k))
    return math.factorial(n) / float(np.prod(mu)) * acc * r**n
