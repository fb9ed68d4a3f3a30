import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from linsde.model import (
    DriverPair,
    JumpComponent,
    JumpDistribution,
    SpecError,
    SubordinatorSpec,
    atom_rate_at_one,
    clearing,
    death_rates,
    exponent_derivatives_at_zero,
    exponent_eval,
    growth_collapse,
    spec_from_parts,
    validate_spec,
)
from strategies import subordinators, y_dists, z_dists, z_specs

P, U, E = JumpDistribution.point, JumpDistribution.uniform, JumpDistribution.exponential


def test_validate_accepts_fractional_collapse():
    pair = DriverPair(SubordinatorSpec(1.0), spec_from_parts(0, [(1, P(0.5))]))
    assert validate_spec(pair) is pair


def test_validate_rejects_collapse_above_one():
    with pytest.raises(SpecError, match="exceeds 1"):
        validate_spec(DriverPair(SubordinatorSpec(1.0), spec_from_parts(0, [(1, P(1.5))])))


def test_validate_rejects_unbounded_z_jumps():
    with pytest.raises(SpecError, match="unbounded support"):
        validate_spec(DriverPair(SubordinatorSpec(1.0), spec_from_parts(0, [(1, E(1.0))])))


@pytest.mark.parametrize(
    "bad",
    [
        lambda: JumpComponent(0.0, P(0.5)),
        lambda: JumpComponent(-1.0, P(0.5)),
        lambda: JumpDistribution("point", 0.0),
        lambda: JumpDistribution("gamma", 1.0),
        lambda: JumpDistribution.erlang(0, 1.0),
        lambda: SubordinatorSpec(-0.1),
        lambda: SubordinatorSpec(math.nan),
    ],
)
def test_bad_parameters_raise(bad):
    with pytest.raises(SpecError):
        bad()


def test_exponent_examples():
    assert exponent_eval(SubordinatorSpec(1.0), 2.0) == 2.0
    assert exponent_eval(spec_from_parts(0, [(1, P(1.0))]), 1.0) == pytest.approx(0.6321205588285577, rel=1e-14)
    assert exponent_eval(spec_from_parts(0, [(1, E(1.0))]), 1.0) == pytest.approx(0.5, rel=1e-14)


@pytest.mark.parametrize(
    "dist, alpha, expected",
    [
        # quadrature of E[1 - exp(-alpha X)]
        (U(0.7), 1.0, 0.2808361482734421),
        (U(1.0), 2.5, 0.6328339994495594),
        (JumpDistribution.erlang(3, 2.0), 0.7, 0.6830390683696469),
    ],
)
def test_laplace_jump_against_quadrature(dist, alpha, expected):
    assert dist.laplace_jump(alpha) == pytest.approx(expected, rel=1e-12)


def test_uniform_exponent_small_alpha_series():
    d = U(0.8)
    for a in (0.0, 1e-12, 1e-8, 1e-7):
        assert d.laplace_jump(a) == pytest.approx(a * 0.4 - (a * 0.8) ** 2 / 6, abs=1e-22)
    # continuity across the switch
    a = 1e-6 / 0.8
    assert d.laplace_jump(a * (1 - 1e-9)) == pytest.approx(d.laplace_jump(a * (1 + 1e-9)), rel=1e-8)


def test_exponent_vectorized():
    z = spec_from_parts(0.3, [(1, P(0.5)), (2, U(1.0))])
    a = np.array([0.0, 0.5, 3.0])
    out = exponent_eval(z, a)
    assert out.shape == (3,)
    assert out[0] == 0.0
    assert out[2] == pytest.approx(exponent_eval(z, 3.0))


def test_derivative_examples():
    assert exponent_derivatives_at_zero(spec_from_parts(0, [(1, P(0.5))]), 3) == [0.5, -0.25, 0.125]
    assert exponent_derivatives_at_zero(SubordinatorSpec(1.0), 2) == [1.0, 0.0]
    assert exponent_derivatives_at_zero(spec_from_parts(0, [(1, E(1.0))]), 2) == [1.0, -2.0]


def test_erlang_moment_against_quadrature():
    # E X^3 for Erlang(3, mean 2)
    assert JumpDistribution.erlang(3, 2.0).moment(3) == pytest.approx(17.777777777777782, rel=1e-12)


def test_atom_rate():
    assert atom_rate_at_one(clearing().z) == 1.0
    assert atom_rate_at_one(growth_collapse().z) == 0.0
    assert atom_rate_at_one(spec_from_parts(0, [(2, P(1.0)), (3, P(0.25))])) == 2.0


def test_death_rate_examples():
    assert death_rates(growth_collapse(q=0.5).z, 3) == pytest.approx([0.5, 0.75, 0.875], rel=1e-15)
    assert death_rates(clearing().z, 3) == [1.0, 1.0, 1.0]
    assert death_rates(SubordinatorSpec(1.0), 3) == [1.0, 2.0, 3.0]


def test_death_rates_zero_z_raises():
    with pytest.raises(SpecError):
        death_rates(SubordinatorSpec(), 2)


@given(z_specs(), st.integers(1, 8))
def test_binomial_identity(z, n):
    """mu_n = sum_k C(n,k) eta^(k)(0) (with the atom at 1 absorbed)."""
    d = exponent_derivatives_at_zero(z, n)
    # eta^(k)(0) = (-1)^(k-1) sum rate E X^k, so the sum is sum rate E[1-(1-X)^n]
    binom = sum(math.comb(n, k) * d[k - 1] for k in range(1, n + 1))
    assert death_rates(z, n)[-1] == pytest.approx(binom, rel=1e-12, abs=1e-13)


@given(z_specs(), st.integers(1, 10))
def test_death_rates_increasing(z, n):
    mu = death_rates(z, n)
    assert all(b >= a for a, b in zip(mu, mu[1:]))
    assert mu[0] == pytest.approx(z.mean_rate(), rel=1e-12)


@given(subordinators(y_dists), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_exponent_monotone_concave(s, a, b):
    lo, hi = sorted((a, b))
    assert exponent_eval(s, lo) <= exponent_eval(s, hi) + 1e-15
    mid = exponent_eval(s, (lo + hi) / 2)
    assert mid >= (exponent_eval(s, lo) + exponent_eval(s, hi)) / 2 - 1e-12


@given(subordinators(y_dists))
def test_derivative_matches_finite_difference(s):
    h = 1e-6
    d1 = exponent_derivatives_at_zero(s, 1)[0]
    fd = (exponent_eval(s, h) - exponent_eval(s, 0.0)) / h
    assert fd == pytest.approx(d1, rel=1e-4, abs=1e-9)


@given(z_dists())
def test_collapse_moment_against_quadrature(d):
    i = 3
    if d.kind == "point":
        expected = 1 - (1 - d.scale) ** i
    else:
        expected = integrate.quad(lambda x: (1 - (1 - x) ** i) / d.scale, 0, d.scale, epsabs=1e-14)[0]
    assert d.collapse_moment(i) == pytest.approx(expected, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("d", [P(0.3), U(0.9), E(1.5), JumpDistribution.erlang(4, 2.0)])
def test_sampling_matches_mean(d):
    x = d.sample(np.random.default_rng(1), 200_000)
    assert np.all(x > 0)
    sd = math.sqrt(max(d.moment(2) - d.moment(1) ** 2, 0.0) / x.size)
    assert abs(x.mean() - d.moment(1)) <= 4 * sd + 1e-15
