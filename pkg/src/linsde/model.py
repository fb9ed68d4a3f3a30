"""
Driving subordinators for X_t = X_0 + Y_t - int_(0,t] X_{s-} dZ_s.

Y and Z are nondecreasing finite-activity Levy processes: a drift plus a
finite superposition of compound-Poisson components.  Z's jumps live in
(0, 1], so a jump of Z multiplies X by a factor in [0, 1).

The exponent calculus collected here feeds every closed-form moment in
:mod:`linsde.moments`: Laplace exponents, their derivatives at zero, the
Poisson rate of total collapses (Z-jumps of size exactly 1) and the
pure-death rates ``mu_i = c*i + int (1 - (1-x)^i) nu(dx)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "SpecError",
    "JumpDistribution",
    "JumpComponent",
    "SubordinatorSpec",
    "DriverPair",
    "validate_spec",
    "exponent_eval",
    "exponent_derivatives_at_zero",
    "atom_rate_at_one",
    "death_rates",
    "shot_noise",
    "growth_collapse",
    "clearing",
    "spec_from_parts",
]

KINDS = ("point", "uniform", "exp", "erlang")

# below this value of alpha*b the uniform exponent switches to its series
_UNIFORM_SERIES_CUTOFF = 1e-6


class SpecError(ValueError):
    """Invalid driver specification."""


@dataclass(frozen=True)
class JumpDistribution:
    """Law of a single jump size.

    ``scale`` is the atom location for ``point``, the upper end ``b`` for
    ``uniform`` (support (0, b]) and the mean for ``exp`` / ``erlang``.
    ``shape`` is the Erlang stage count and is 1 for every other kind.
    """

    kind: str
    scale: float
    shape: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown jump distribution kind {self.kind!r}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise SpecError(f"{self.kind} jump parameter must be positive, got {self.scale!r}")
        if int(self.shape) != self.shape or self.shape < 1:
            raise SpecError(f"erlang stage count must be a positive integer, got {self.shape!r}")
        if self.kind != "erlang" and self.shape != 1:
            raise SpecError(f"{self.kind} jumps take no shape parameter")

    @classmethod
    def point(cls, x: float) -> "JumpDistribution":
        return cls("point", float(x))

    @classmethod
    def uniform(cls, b: float) -> "JumpDistribution":
        return cls("uniform", float(b))

    @classmethod
    def exponential(cls, mean: float) -> "JumpDistribution":
        return cls("exp", float(mean))

    @classmethod
    def erlang(cls, k: int, mean: float) -> "JumpDistribution":
        return cls("erlang", float(mean), int(k))

    @property
    def support_max(self) -> float:
        """Supremum of the support (``inf`` for unbounded laws)."""
        if self.kind in ("point", "uniform"):
            return self.scale
        return math.inf

    @property
    def mean(self) -> float:
        return self.moment(1)

    def moment(self, k: int) -> float:
        """E[X^k] in closed form."""
        if k < 0:
            raise ValueError("moment order must be nonnegative")
        s = self.scale
        if self.kind == "point":
            return s**k
        if self.kind == "uniform":
            return s**k / (k + 1)
        if self.kind == "exp":
            return s**k * math.factorial(k)
        # Gamma(shape=n, scale=m/n): E X^k = (m/n)^k n (n+1) ... (n+k-1)
        n = self.shape
        return (s / n) ** k * math.prod(range(n, n + k))

    def laplace_jump(self, alpha):
        """E[1 - exp(-alpha X)], vectorized over ``alpha``."""
        a = np.asarray(alpha, dtype=float)
        s = self.scale
        if self.kind == "point":
            out = -np.expm1(-a * s)
        elif self.kind == "uniform":
            u = a * s
            small = np.abs(u) < _UNIFORM_SERIES_CUTOFF
            safe = np.where(small, 1.0, u)
            out = np.where(small, u / 2 - u * u / 6, 1.0 + np.expm1(-safe) / safe)
        elif self.kind == "exp":
            out = a * s / (1.0 + a * s)
        else:
            n = self.shape
            out = -np.expm1(-n * np.log1p(a * s / n))
        return out if out.ndim else float(out)

    def collapse_moment(self, i: float) -> float:
        """E[1 - (1-X)^i]; only defined when the support sits in (0, 1]."""
        if self.support_max > 1:
            raise SpecError(f"collapse moment undefined for {self.kind} jumps with support beyond 1")
        s = self.scale
        if self.kind == "point":
            return 1.0 - (1.0 - s) ** i
        # uniform(0, b]: 1 - (1 - (1-b)^{i+1}) / (b (i+1))
        return 1.0 - (1.0 - (1.0 - s) ** (i + 1)) / (s * (i + 1))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        s = self.scale
        if self.kind == "point":
            return np.full(size, s)
        if self.kind == "uniform":
            # (0, b] rather than [0, b)
            return s * (1.0 - rng.random(size))
        if self.kind == "exp":
            return rng.exponential(s, size)
        return rng.gamma(self.shape, s / self.shape, size)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        if self.kind == "point":
            return (x >= s).astype(float)
        if self.kind == "uniform":
            return np.clip(x / s, 0.0, 1.0)
        from scipy.special import gammainc

        rate = self.shape / s
        return gammainc(self.shape, np.maximum(x, 0.0) * rate)


@dataclass(frozen=True)
class JumpComponent:
    """Compound-Poisson component: jumps at ``rate`` per unit time, sizes from ``dist``."""

    rate: float
    dist: JumpDistribution

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise SpecError(f"jump rate must be positive, got {self.rate!r}")


@dataclass(frozen=True)
class SubordinatorSpec:
    """Drift plus finitely many compound-Poisson components."""

    drift: float = 0.0
    components: tuple[JumpComponent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (math.isfinite(self.drift) and self.drift >= 0):
            raise SpecError(f"drift must be nonnegative, got {self.drift!r}")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def total_rate(self) -> float:
        return sum(c.rate for c in self.components)

    @property
    def is_zero(self) -> bool:
        return self.drift == 0 and not self.components

    @property
    def is_pure_drift(self) -> bool:
        return not self.components

    def mean_rate(self) -> float:
        """E[S_1] = drift + sum rate_k E[jump_k]."""
        return self.drift + sum(c.rate * c.dist.moment(1) for c in self.components)

    def exponent(self, alpha):
        return exponent_eval(self, alpha)

    def jump_exponent(self, alpha):
        """Jump part of the exponent, i.e. ``exponent(alpha) - drift*alpha``."""
        a = np.asarray(alpha, dtype=float)
        out = np.zeros_like(a)
        for c in self.components:
            out = out + c.rate * np.asarray(c.dist.laplace_jump(a))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class DriverPair:
    """The additive input ``y`` and the multiplicative input ``z``."""

    y: SubordinatorSpec
    z: SubordinatorSpec


def _check_z(z: SubordinatorSpec) -> None:
    for i, comp in enumerate(z.components):
        d = comp.dist
        if d.kind in ("exp", "erlang"):
            raise SpecError(
                f"z component {i}: {d.kind} jumps have unbounded support; Z jumps must lie in (0, 1]"
            )
        if d.support_max > 1:
            raise SpecError(f"z component {i}: jump {d.kind}({d.scale}) exceeds 1")


def validate_spec(pair: DriverPair) -> DriverPair:
    """Return ``pair`` unchanged if both drivers satisfy the model assumptions.

    Raises
    ------
    SpecError
        If a rate or parameter is nonpositive, or a Z-jump law puts mass
        above 1.
    """
    for name, spec in (("y", pair.y), ("z", pair.z)):
        if not isinstance(spec, SubordinatorSpec):
            raise SpecError(f"{name} must be a SubordinatorSpec")
        # dataclass checks run at construction; re-run them in case the
        # objects were built with object.__setattr__ tricks
        SubordinatorSpec(spec.drift, spec.components)
        for comp in spec.components:
            JumpComponent(comp.rate, comp.dist)
            JumpDistribution(comp.dist.kind, comp.dist.scale, comp.dist.shape)
    _check_z(pair.z)
    return pair


def exponent_eval(spec: SubordinatorSpec, alpha):
    """Laplace exponent eta(alpha) with E exp(-alpha S_1) = exp(-eta(alpha))."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0):
        raise ValueError("exponent is only evaluated at alpha >= 0")
    out = spec.drift * a + np.asarray(spec.jump_exponent(a))
    return out if out.ndim else float(out)


def exponent_derivatives_at_zero(spec: SubordinatorSpec, k_max: int) -> list[float]:
    """[eta'(0), eta''(0), ..., eta^(k_max)(0)].

    eta'(0) = drift + sum rate*E[X];  eta^(k)(0) = (-1)^(k-1) sum rate*E[X^k].
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    out = []
    for k in range(1, k_max + 1):
        m = sum(c.rate * c.dist.moment(k) for c in spec.components)
        if k == 1:
            out.append(spec.drift + m)
        else:
            out.append((-1) ** (k - 1) * m)
    return out


def atom_rate_at_one(z: SubordinatorSpec) -> float:
    """Rate of total collapses: the Levy measure's mass at exactly 1."""
    return sum(c.rate for c in z.components if c.dist.kind == "point" and c.dist.scale == 1.0)


def death_rates(z: SubordinatorSpec, n: int) -> list[float]:
    """Pure-death rates mu_1..mu_n, mu_i = c*i + sum rate*E[1 - (1-X)^i].

    Uses the direct form; the alternating binomial expansion in terms of
    exponent derivatives cancels badly for large ``i``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_z(z)
    if z.is_zero:
        raise SpecError("death rates of the zero subordinator all vanish")
    return [
        z.drift * i + sum(c.rate * c.dist.collapse_moment(i) for c in z.components)
        for i in range(1, n + 1)
    ]


# -- scenario shorthands -------------------------------------------------------


def shot_noise(jump_rate: float = 1.0, jump_mean: float = 1.0, decay: float = 1.0) -> DriverPair:
    """Poisson shots with exponential sizes, exponential decay at ``decay``."""
    y = SubordinatorSpec(0.0, (JumpComponent(jump_rate, JumpDistribution.exponential(jump_mean)),))
    return DriverPair(y, SubordinatorSpec(decay))


def growth_collapse(r: float = 1.0, rate: float = 1.0, q: float = 0.5) -> DriverPair:
    """Linear growth at ``r``, collapse by factor ``1-q`` at Poisson(``rate``) epochs."""
    return DriverPair(
        SubordinatorSpec(r),
        SubordinatorSpec(0.0, (JumpComponent(rate, JumpDistribution.point(q)),)),
    )


def clearing(r: float = 1.0, rate: float = 1.0) -> DriverPair:
    """Linear growth reset to zero at Poisson(``rate``) epochs."""
    return growth_collapse(r, rate, 1.0)


def spec_from_parts(drift: float, parts: Sequence[tuple[float, JumpDistribution]]) -> SubordinatorSpec:
    return SubordinatorSpec(float(drift), tuple(JumpComponent(float(r), d) for r, d in parts))
