import math

import numpy as np
import pytest
from hypothesis import assume, example, given
from hypothesis import strategies as st
from scipy import integrate
from scipy.linalg import expm
from scipy.stats import gamma

from linsde.model import (
    JumpComponent,
    JumpDistribution,
    SubordinatorSpec,
    clearing,
    death_rates,
    growth_collapse,
    shot_noise,
)
from linsde.moments import (
    DeathModel,
    ExpMixture,
    TiesError,
    death_transition_row,
    death_transition_row_pf,
    hypoexp_cdf_mixture,
    laplace_of_mixture,
    moment_at_exponential_time,
    moment_curve,
    moment_linear_growth,
    moment_via_simplex,
    second_moment_curve,
    simplex_g,
    simplex_recursion,
    stationary_second_moment,
    transient_mean,
    transient_mean_curve,
    transient_mean_numeric,
    transient_second_moment,
)
from strategies import z_specs

GC = growth_collapse(r=1.0, rate=1.0, q=0.5)
E1 = 1 - math.exp(-1)


def _expm_row(rates, start, t):
    """Transition row of the pure-death chain from the matrix exponential."""
    n = len(rates)
    Q = np.zeros((n + 1, n + 1))
    for i in range(1, n + 1):
        Q[i, i] = -rates[i - 1]
        Q[i, i - 1] = rates[i - 1]
    return expm(Q * t)[start]


def _simplex_quad_2(a, b):
    return integrate.dblquad(lambda y, x: math.exp(-a * x - b * y), 0, 1, 0, lambda x: 1 - x, epsabs=1e-14)[0]


# -- mean ---------------------------------------------------------------------------


def test_transient_mean_examples():
    assert transient_mean(0, 1, SubordinatorSpec(1.0), 1.0) == pytest.approx(E1, rel=1e-15)
    assert transient_mean(2, 1.5, SubordinatorSpec(), 3.0) == 2 + 4.5
    assert transient_mean(0, 1, GC.z, 200.0) == pytest.approx(2.0, rel=1e-14)


def test_transient_mean_curve_matches_function():
    c = transient_mean_curve(0.7, 1.3, GC.z)
    t = np.linspace(0, 8, 17)
    np.testing.assert_allclose(c(t), transient_mean(0.7, 1.3, GC.z, t), rtol=1e-14)


def test_numeric_mean_examples():
    g = np.linspace(0, 2, 2001)
    v, _ = transient_mean_numeric(0, 1, g, np.exp(-g), 1.0)
    assert v == pytest.approx(E1, abs=1e-6)
    v, _ = transient_mean_numeric(1.5, 2.0, g, np.ones_like(g), 1.25)
    assert v == pytest.approx(1.5 + 2.5, rel=1e-14)


# -- second moment -------------------------------------------------------------------


def test_second_moment_examples():
    sn = shot_noise()
    assert transient_second_moment(sn.y, sn.z, 1.0) == pytest.approx(2 * E1, rel=1e-14)
    assert transient_second_moment(sn.y, sn.z, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert transient_second_moment(GC.y, GC.z, 400.0) == pytest.approx(16 / 3, rel=1e-13)


def test_stationary_second_moment_examples():
    sn = shot_noise()
    assert stationary_second_moment(sn.y, sn.z) == pytest.approx(2.0, rel=1e-15)
    assert stationary_second_moment(GC.y, GC.z) == pytest.approx(16 / 3, rel=1e-15)
    cl = clearing()
    assert stationary_second_moment(cl.y, cl.z) == pytest.approx(2.0, rel=1e-15)


def test_tied_second_moment_matches_death_chain():
    cl = clearing()
    curve = second_moment_curve(cl.y, cl.z)
    assert any(p == 1 for _, _, p in curve.terms)
    for t in (0.3, 1.0, 4.0):
        assert curve(t) == pytest.approx(moment_linear_growth(0, 2, t, cl.z), rel=1e-12)


@example(SubordinatorSpec(0.0, (JumpComponent(0.125, JumpDistribution.point(0.0546875)),)), 1.0, 0.0625)
@given(z_specs(), st.floats(0.1, 2.0), st.floats(0.05, 6.0))
def test_second_moment_matches_death_chain(z, r, t):
    y = SubordinatorSpec(r)
    assert transient_second_moment(y, z, t) == pytest.approx(moment_linear_growth(0, 2, t, z, r), rel=1e-9)


# -- death chain ---------------------------------------------------------------------


def test_transition_row_examples():
    row = death_transition_row([0.5, 0.75], 2, 2.0)
    # expm of the generator, plus the closed form 1 - 3e^{-1} + 2e^{-3/2}
    np.testing.assert_allclose(row, _expm_row([0.5, 0.75], 2, 2.0), rtol=1e-12)
    assert row[2] == pytest.approx(math.exp(-1.5), rel=1e-13)
    assert row[0] == pytest.approx(1 - 3 * math.exp(-1) + 2 * math.exp(-1.5), rel=1e-13)
    assert row[0] == pytest.approx(0.3426220, abs=1e-7)
    assert death_transition_row([1.0, 1.0], 2, 1.0)[0] == pytest.approx(1 - 2 / math.e, rel=1e-13)


@given(st.lists(st.floats(0.05, 5.0), min_size=1, max_size=8), st.floats(0.0, 10.0), st.data())
def test_uniformization_matches_expm(rates, t, data):
    start = data.draw(st.integers(1, len(rates)))
    row = death_transition_row(rates, start, t)
    np.testing.assert_allclose(row, _expm_row(rates, start, t)[: start + 1], atol=1e-12)
    assert row.sum() == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(0.05, 5.0), min_size=1, max_size=6, unique=True), st.floats(0.0, 10.0))
def test_uniformization_matches_partial_fractions(rates, t):
    rates = sorted(rates)
    assume(min(np.diff(rates), default=1.0) > 1e-2)
    n = len(rates)
    np.testing.assert_allclose(death_transition_row(rates, n, t), death_transition_row_pf(rates, n, t), atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_hypoexp_tied_is_erlang(k):
    mix = hypoexp_cdf_mixture([1.3] * k)
    for t in (0.1, 1.0, 5.0):
        assert mix(t) == pytest.approx(gamma.cdf(t, k, scale=1 / 1.3), rel=1e-12, abs=1e-15)


# -- n-th moment ----------------------------------------------------------------------


def test_moment_examples():
    assert moment_linear_growth(0, 1, 2.0, GC.z) == pytest.approx(2 * E1, rel=1e-14)
    assert moment_linear_growth(0, 2, 2.0, GC.z) == pytest.approx(
        (2 / 0.375) * (1 - 3 * math.exp(-1) + 2 * math.exp(-1.5)), rel=1e-13
    )
    assert moment_linear_growth(3, 1, 1.0, clearing().z) == pytest.approx(E1 + 3 / math.e, rel=1e-14)
    assert moment_linear_growth(3, 1, 1.0, clearing().z) == pytest.approx(
        transient_mean(3, 1, clearing().z, 1.0), rel=1e-14
    )


def test_moment_order_limit():
    with pytest.raises(ValueError):
        moment_linear_growth(0, 13, 1.0, GC.z)


def test_no_growth_is_pure_decay():
    assert moment_linear_growth(2.0, 3, 1.5, GC.z, r=0) == pytest.approx(8 * math.exp(-0.875 * 1.5))


@given(z_specs(), st.floats(0.0, 20.0))
def test_first_moment_reduction(z, t):
    assert moment_linear_growth(0, 1, t, z) == pytest.approx(transient_mean(0, 1, z, t), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("n", range(1, 7))
def test_clearing_moments_are_erlang(n):
    lam = 1.7
    z = clearing(1.0, lam).z
    for t in (0.2, 1.0, 3.0, 60.0):
        exact = math.factorial(n) / lam**n * gamma.cdf(t, n, scale=1 / lam)
        assert moment_linear_growth(0, n, t, z) == pytest.approx(exact, rel=1e-12)
        assert moment_curve(0, n, z)(t) == pytest.approx(exact, rel=1e-12)


@given(z_specs(), st.integers(1, 6), st.floats(0.0, 3.0), st.floats(0.1, 3.0), st.floats(0.01, 8.0))
def test_curve_matches_row(z, n, x, r, t):
    a = moment_linear_growth(x, n, t, z, r)
    # evaluate the raw mixture, not the curve's own (row-based) evaluator;
    # its float sum cancels terms much larger than the result
    terms = moment_curve(x, n, z, r).terms
    b = float(ExpMixture(terms)(t))
    size = sum(abs(float(c)) * t**p * math.exp(-rho * t) for c, rho, p in terms)
    assert abs(b - a) <= 1e-8 * abs(a) + 64 * np.finfo(float).eps * size


@pytest.mark.parametrize("n", [6, 9, 12])
def test_high_order_curve_limit_and_value(n):
    """Rates cluster near 1 for q = 1/2; the exact constant term still gives
    the stationary moment n!/prod(mu) and evaluation stays finite."""
    mu = death_rates(GC.z, n)
    c = moment_curve(0.5, n, GC.z)
    assert c.limit() == pytest.approx(math.factorial(n) / math.prod(mu), rel=1e-14)
    assert c(200.0) == pytest.approx(c.limit(), rel=1e-10)
    assert c(3.0) == moment_linear_growth(0.5, n, 3.0, GC.z)


@given(z_specs(), st.integers(1, 5), st.floats(0.0, 2.0))
def test_moments_increase_from_zero(z, n, t):
    """X_0 = 0 makes X_t stochastically increasing, so every moment is."""
    assert moment_linear_growth(0, n, t, z) <= moment_linear_growth(0, n, t + 0.5, z) * (1 + 1e-12)


# -- simplex recursion ----------------------------------------------------------------


def test_simplex_examples():
    assert simplex_recursion([1.0]) == pytest.approx(E1, rel=1e-15)
    assert simplex_recursion([1.0, 2.0]) == pytest.approx(_simplex_quad_2(1.0, 2.0), rel=1e-12)
    assert simplex_recursion([1.0, 2.0]) == pytest.approx(0.1997882, abs=1e-7)
    v = 8 * simplex_recursion([1.0, 1.5])
    assert v == pytest.approx(moment_linear_growth(0, 2, 2.0, GC.z), rel=1e-10)
    assert simplex_recursion([]) == 1.0


def test_simplex_negative_arguments():
    assert simplex_recursion([-1.0]) == pytest.approx(math.e - 1, rel=1e-14)
    assert simplex_recursion([-1.0, 0.5]) == pytest.approx(_simplex_quad_2(-1.0, 0.5), rel=1e-12)


@given(st.lists(st.floats(-3.0, 8.0), min_size=2, max_size=2))
def test_simplex_matches_quadrature(a):
    assume(abs(a[0]) > 1e-3 and abs(a[1]) > 1e-3 and abs(a[0] - a[1]) > 1e-3)
    assert simplex_recursion(a) == pytest.approx(_simplex_quad_2(*a), rel=1e-9)


def test_simplex_symmetric_and_g():
    assert simplex_recursion([2.0, 0.5, 1.0]) == pytest.approx(simplex_recursion([0.5, 1.0, 2.0]), rel=1e-15)
    assert simplex_g([0.5, 0.5, 1.0]) == pytest.approx(simplex_recursion([0.5, 1.0, 2.0]), rel=1e-12)


def test_simplex_refuses_ties():
    with pytest.raises(TiesError):
        simplex_recursion([1.0, 1.0 + 1e-8])
    with pytest.raises(TiesError):
        simplex_recursion([0.0, 1.0])
    with pytest.raises(TiesError):
        moment_via_simplex(2, 1.0, clearing().z)


# -- exponential horizon and Laplace transform ---------------------------------------------


def test_exponential_time_examples():
    assert moment_at_exponential_time(0, 1, 0.5, DeathModel((0.5,))) == pytest.approx(1.0, rel=1e-15)
    assert moment_at_exponential_time(0, 2, 1.0, [0.5, 0.75]) == pytest.approx(
        (2 / 0.375) * (0.5 / 1.5) * (0.75 / 1.75), rel=1e-14
    )


def test_laplace_examples():
    assert laplace_of_mixture(ExpMixture.constant(1.0), 2.0) == pytest.approx(0.5)
    assert laplace_of_mixture(ExpMixture(((1.0, 1.0, 0),)), 1.0) == pytest.approx(0.5)
    m = transient_mean_curve(0, 1, SubordinatorSpec(0.5))
    assert 0.5 * laplace_of_mixture(m, 0.5) == pytest.approx(1.0, rel=1e-15)


def test_laplace_of_power_term_against_quadrature():
    m = ExpMixture(((1.5, 0.7, 2),))
    q = integrate.quad(lambda t: math.exp(-1.3 * t) * 1.5 * t * t * math.exp(-0.7 * t), 0, math.inf)[0]
    assert laplace_of_mixture(m, 1.3) == pytest.approx(q, rel=1e-10)


@given(z_specs(), st.integers(1, 6), st.floats(0.0, 3.0), st.sampled_from([0.25, 1.0, 4.0]))
def test_laplace_identity(z, n, x, theta):
    curve = moment_curve(x, n, z)
    lhs = theta * laplace_of_mixture(curve, theta)
    rhs = moment_at_exponential_time(x, n, theta, DeathModel.from_z(z, n))
    # the transform sums terms far larger than the result when rates are
    # small against theta; allow rounding in proportion to that size
    size = theta * sum(abs(c) * math.factorial(p) / (theta + r) ** (p + 1) for c, r, p in curve.terms)
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs) + 64 * np.finfo(float).eps * size


def test_mixture_merging_and_arith():
    a = ExpMixture(((1.0, 0.5, 0), (2.0, 0.5, 0), (1.0, 0.0, 1)))
    assert len(a.terms) == 2
    b = a - a
    assert b(3.0) == 0.0
    assert a.limit() == math.inf
    assert ExpMixture(((2.0, 0.0, 0), (1.0, 1.0, 3))).limit() == 2.0
