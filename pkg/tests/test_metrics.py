"""Distances, KS, lower-bound pair, counterexample and rate fitting."""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from boundarypp.errors import NumericalError, ValidationError
from boundarypp.metrics import (DistanceReport, block_density_gap, block_extreme_hellinger,
                                counterexample_power,
                                counterexample_theory, extreme_law_cdf, fit_rate,
                                hellinger_boundary_closed_form, hellinger_exponential,
                                hellinger_ppp, hypoexp_survival, ks_distance, ks_uniform,
                                l1_distance, lower_bound_pair, min_uniform_hellinger,
                                rate_study, search_n0, theory_slopes, tv_bounds)
from boundarypp.model import (ExperimentSpec, bump_kernel, linear_design, linear_error,
                              oscillating_sine, polynomial, quadratic_jump_error,
                              scaled_sinusoid, uniform_design, uniform_error, zero_function)
from boundarypp.samplers import Band, IntensityFunction, boundary_intensities


def exp_h2_quad(a, b):
    f = lambda x: (math.sqrt(a * math.exp(-a * x)) - math.sqrt(b * math.exp(-b * x))) ** 2  # noqa: E731
    return integrate.quad(f, 0, math.inf, epsabs=1e-14, epsrel=1e-13)[0]


@pytest.mark.parametrize("a,b", [(2.0, 1.0), (0.1, 7.0), (3.0, 3.0), (1e-3, 1.0)])
def test_exponential_hellinger_matches_quadrature(a, b):
    assert hellinger_exponential(a, b) == pytest.approx(exp_h2_quad(a, b), abs=1e-10)


def test_exponential_hellinger_known_value():
    assert hellinger_exponential(2.0, 1.0) == pytest.approx(0.1143819, abs=1e-7)


def test_band_intensities_closed_form():
    a = IntensityFunction(uniform_design(), Band(0, 1), 4.0, (0, 1))
    b = IntensityFunction(uniform_design(), Band(0, 1), 1.0, (0, 1))
    assert hellinger_ppp(a, b).value == pytest.approx(2 * (1 - math.exp(-0.5)), abs=1e-13)
    assert hellinger_ppp(a, a).value == 0.0


def test_hellinger_ppp_matches_bruteforce_2d():
    spec = ExperimentSpec(3, linear_design(1.0), linear_error(0.5), 1.0)
    t1, t2 = polynomial([0.2, -0.4], 1.0), polynomial([-0.1, 0.5], 1.0)
    l1, l2 = boundary_intensities(t1, spec)[0], boundary_intensities(t2, spec)[0]
    cross = 0.3 / 0.9

    def inner(x):
        lo, hi = sorted([float(t1.eval(np.array([x]))[0]), float(t2.eval(np.array([x]))[0])])
        g = lambda y: (math.sqrt(l1(x, y)) - math.sqrt(l2(x, y))) ** 2  # noqa: E731
        return integrate.quad(g, lo, hi, epsabs=1e-13)[0] + integrate.quad(g, -2, lo)[0]

    total = integrate.quad(inner, 0, 1, points=[cross], epsabs=1e-12)[0]
    assert hellinger_ppp(l1, l2).value == pytest.approx(2 * (1 - math.exp(-total / 2)), abs=1e-9)


@settings(max_examples=25)
@given(st.integers(2, 60), st.floats(-0.5, 2.0), st.floats(-0.9, 0.9),
       st.lists(st.floats(-0.4, 0.4), min_size=3, max_size=3), st.floats(-0.3, 0.3),
       st.floats(0.5, 8.0))
def test_closed_form_equals_ppp_quadrature(n, b, beta, coeffs, c, omega):
    spec = ExperimentSpec(n, linear_design(b), linear_error(beta), 2.0)
    t1, t2 = polynomial(coeffs, 2.0), scaled_sinusoid(c, omega, 2.0)
    q = hellinger_ppp(boundary_intensities(t1, spec), boundary_intensities(t2, spec)).value
    cf = hellinger_boundary_closed_form(t1, t2, n, spec.error.J, spec.design).value
    assert q == pytest.approx(cf, abs=1e-9)


def test_l1_distance_of_oscillation():
    # int |sin(pi k x)| over [0, 1] is 2/pi for every integer k
    th = oscillating_sine(1.0, 11)
    val, _ = l1_distance(th, zero_function(), uniform_design())
    assert val == pytest.approx(2 / math.pi / (math.pi * 10), rel=1e-10)


def exact_minmax_h2(l, phi, F, mu1, mu2):
    # direct 2-D oracle on the triangle plus the surrogate mass outside it
    def integrand(y, x):
        f = l * (l - 1) * phi(x) * phi(y) * (F(y) - F(x)) ** (l - 2)
        g = mu1 * mu2 * math.exp(-mu1 * (x + 1) - mu2 * (1 - y))
        return (math.sqrt(f) - math.sqrt(g)) ** 2
    inside = integrate.dblquad(integrand, -1, 1, lambda x: x, lambda x: 1,
                               epsabs=1e-12, epsrel=1e-10)[0]
    outside = integrate.dblquad(lambda v, u: mu1 * mu2 * math.exp(-mu1 * u - mu2 * v),
                                0, 60, lambda u: max(0.0, 2.0 - u), lambda u: 60,
                                epsabs=1e-13)[0]
    return inside + outside


@pytest.mark.parametrize("l", [3, 4, 6])
def test_block_extreme_matches_dblquad_uniform(l):
    phi = lambda t: 0.5  # noqa: E731
    F = lambda t: 0.5 * (t + 1)  # noqa: E731
    mu = (l - 2) * 0.5
    ref = exact_minmax_h2(l, phi, F, mu, mu)
    assert block_extreme_hellinger(l) == pytest.approx(ref, abs=1e-8)


def test_block_extreme_matches_dblquad_linear():
    beta, l = 0.5, 5
    phi = lambda t: 0.5 * (1 + beta * t)  # noqa: E731
    F = lambda t: 0.5 * (t + 1) + 0.25 * beta * (t * t - 1)  # noqa: E731
    ref = exact_minmax_h2(l, phi, F, (l - 2) * phi(-1), (l - 2) * phi(1))
    assert block_extreme_hellinger(l, linear_error(beta)) == pytest.approx(ref, abs=1e-8)


def test_block_extreme_shift_invariant():
    a = block_extreme_hellinger(40, linear_error(0.3), 0.0)
    b = block_extreme_hellinger(40, linear_error(0.3), 1.7)
    assert a == pytest.approx(b, rel=1e-12)


def test_block_extreme_requires_three():
    with pytest.raises(ValidationError):
        block_extreme_hellinger(2)


@pytest.mark.parametrize("m1,m2,t", [(1.0, 2.0, 2.0), (3.0, 3.0, 1.0), (0.5, 0.5 + 1e-12, 2.0)])
def test_hypoexp_survival(m1, m2, t):
    # P(A + B > t) = P(A > t) + int_0^t m1 e^{-m1 a} e^{-m2 (t - a)} da
    ref = math.exp(-m1 * t) + integrate.quad(
        lambda a: m1 * math.exp(-m1 * a) * math.exp(-m2 * (t - a)), 0, t, epsabs=1e-14)[0]
    assert hypoexp_survival(m1, m2, t) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("I", [1, 10, 100, 1000])
def test_min_uniform_matches_high_precision(I):
    mpmath.mp.dps = 40
    f = lambda x: (mpmath.sqrt(I * (1 - x) ** (I - 1)) - mpmath.sqrt(I * mpmath.e ** (-I * x))) ** 2  # noqa: E731
    pts = [0] + [min(1, mpmath.mpf(2) ** k / (4 * I)) for k in range(0, 40) if 2**k / (4 * I) < 1] + [1]
    ref = mpmath.quad(f, pts) + mpmath.e ** (-I)
    assert min_uniform_hellinger(I) == pytest.approx(float(ref), rel=1e-9, abs=1e-15)


def test_ks_matches_scipy(rng):
    u = rng.random(500)
    assert ks_uniform(u) == pytest.approx(stats.kstest(u, "uniform").statistic, abs=1e-15)
    z = rng.normal(size=300)
    assert ks_distance(z, stats.norm.cdf) == pytest.approx(stats.kstest(z, "norm").statistic,
                                                           abs=1e-15)
    with pytest.raises(ValidationError):
        ks_uniform([])


def test_extreme_law_cdf():
    x = np.array([-1.0, -0.1, 0.0, 0.5])
    np.testing.assert_allclose(extreme_law_cdf(x, 0.0, 10.0),
                               [math.exp(-10), math.exp(-1), 1.0, 1.0])


def test_distance_report_range():
    with pytest.raises(NumericalError):
        DistanceReport("hellinger_sq", 2.5, "quadrature")
    with pytest.raises(ValidationError):
        DistanceReport("nope", 0.1, "quadrature")
    lo, hi = tv_bounds(0.5)
    assert lo == 0.25 and hi == pytest.approx(math.sqrt(0.5 * (1 - 0.125)))


@pytest.mark.parametrize("k,s", [(0, 2.0), (1, 2.0), (2, 3.0), (0, 1.5)])
def test_lower_bound_separation_formula(k, s):
    for n in (100, 10_000, 1_000_000):
        pair = lower_bound_pair(s, 1.3, k, n, 1.0)
        assert pair.separation == pytest.approx(pair.separation_formula, rel=1e-13)
        assert pair.hellinger <= 1.0


def test_lower_bound_hellinger_limit():
    # with a uniform design the exponent equals int|K| / 2 exactly
    K = bump_kernel(0, 2.0)
    intK = integrate.quad(lambda u: abs(float(K.eval(np.array([u]))[0])), -0.5, 0.5)[0]
    pair = lower_bound_pair(2.0, 1.0, 0, 10**6, 1.0)
    assert pair.hellinger == pytest.approx(math.sqrt(2 * (1 - math.exp(-intK / 2))), rel=1e-9)


def test_lower_bound_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        lower_bound_pair(2.0, 1.0, 0, 3, 1.0, x0=0.1)  # bump sticks out of [0, 1]
    with pytest.raises(ValidationError):
        lower_bound_pair(2.0, 1.0, 0, 1000, 1.0, kernel=polynomial([0, 0, 10.0], 1.0))
    assert search_n0(2.0, 1.0, 0, 1.0) is not None


def test_counterexample_theory_matches_quadrature():
    C, n = 1.0, 1000
    err = quadratic_jump_error()
    th = oscillating_sine(C, n)
    pos = integrate_piecewise(lambda x: max(th.eval(np.array([x]))[0], 0.0), n)
    neg = integrate_piecewise(lambda x: max(-th.eval(np.array([x]))[0], 0.0), n)
    ref = 1 - math.exp(-n * (err.jump_right * pos + err.jump_left * neg))
    assert counterexample_theory(C, n) == pytest.approx(ref, abs=1e-10)
    assert counterexample_theory(C, n) == pytest.approx(
        1 - math.exp(-2 * C / math.pi**2 * n / (n - 1)), abs=1e-12)


def integrate_piecewise(f, n):
    e = np.arange(n) / (n - 1)
    return sum(integrate.quad(f, a, b)[0] for a, b in zip(e[:-1], e[1:]))


def test_counterexample_small_run():
    res = counterexample_power(1.0, 200, 1000, seed=3)
    assert res.null_power == 0.0
    assert abs(res.empirical_power - res.theory_power) < 4 * math.sqrt(
        res.theory_power * (1 - res.theory_power) / 1000)
    with pytest.raises(ValidationError):
        counterexample_power(1.0, 200, 999, seed=3)


def test_fit_rate_exact_power_law():
    ns = [100, 400, 1600, 6400]
    risks = [3.0 * n ** -1.5 for n in ns]
    r = fit_rate(ns, risks, [x * 0.01 for x in risks], -1.5)
    assert r.slope == pytest.approx(-1.5, abs=1e-12) and math.isfinite(r.slope_se)
    d = fit_rate(ns, [0.2] * 4, [0.0] * 4, -1.5)
    assert d.degenerate and d.slope == pytest.approx(0.0, abs=1e-12) and d.slope_se == math.inf


def test_theory_slopes():
    assert theory_slopes(1.0) == {"value": -1.5, "derivative": -1.0}


def test_rate_study_small_and_reproducible():
    th = scaled_sinusoid(0.2, 3.0, c_theta=8.0)
    spec = ExperimentSpec(100, uniform_design(), uniform_error(), 8.0)
    a = rate_study({"bandwidth_const": 1.0}, th, spec, [200, 400, 800], 10, 5)
    b = rate_study({"bandwidth_const": 1.0}, th, spec, [200, 400, 800], 10, 5, workers=3)
    assert a["value"].risks == b["value"].risks
    assert a["value"].theory_slope == -1.5
    with pytest.raises(ValidationError):
        rate_study({}, th, spec, [200, 400], 10, 5)


@pytest.mark.parametrize("m", [3, 10, 40])
def test_block_density_gap_matches_direct_quadrature(m):
    spec = ExperimentSpec(200, linear_design(1.0), linear_error(0.3), 1.0)
    th = polynomial([0.1, 0.2], 1.0)
    lo, hi = spec.y_bounds
    f, F = spec.design.density, spec.design.cdf

    def piece(k):
        a, b = k / m, (k + 1) / m
        fbar = m * (F(b) - F(a))
        # both processes share the x-profile; heights add to hi - lo
        g = lambda x: (math.sqrt(f(x)) - math.sqrt(fbar)) ** 2 * (  # noqa: E731
            spec.error.jump_right * (th(x) - lo) + spec.error.jump_left * (hi - th(x)))
        return integrate.quad(g, a, b, epsabs=1e-15, epsrel=1e-13)[0]

    integral = spec.n * sum(piece(k) for k in range(m))
    expected = 2 * (1 - math.exp(-integral / 2))
    assert block_density_gap(th, spec, m).value == pytest.approx(expected, rel=1e-9, abs=1e-13)


def test_block_density_gap_shrinks_quadratically():
    spec = ExperimentSpec(200, linear_design(1.0), linear_error(0.3), 1.0)
    th = polynomial([0.1, 0.2], 1.0)
    ms = [10, 20, 40, 80]
    slope = np.polyfit(np.log(ms), np.log([block_density_gap(th, spec, m).value for m in ms]), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.05)
