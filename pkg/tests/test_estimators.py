"""Local admissible quadratic fits and the pilot grid."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from boundarypp.errors import InfeasibleError, ValidationError
from boundarypp.estimators import (PilotEstimate, admissible_fit_ppp, admissible_fit_regression,
                                   bandwidth, oracle_pilot, pilot_estimate, window)
from boundarypp.model import (ExperimentSpec, holder_band, polynomial, scaled_sinusoid,
                              uniform_design, uniform_error, linear_error)
from boundarypp.samplers import (PointProcessRealization, RegressionSample, sample_boundary_pair,
                                 sample_regression)


def ppp(points, tag, scale=100.0):
    return PointProcessRealization(np.asarray(points, float).reshape(-1, 2), tag, 0.0, 0, scale,
                                   (-3.0, 3.0))


def test_window_clipping():
    assert window(0.5, 0.1) == pytest.approx((0.4, 0.6))
    assert window(0.02, 0.1) == (0.0, 0.2)
    assert window(0.95, 0.1) == pytest.approx((0.8, 1.0))
    with pytest.raises(ValidationError):
        window(0.5, 0.7)


def test_bandwidth_rate():
    assert bandwidth(10_000, 1.0) == pytest.approx(0.1)
    assert bandwidth(10_000, 1.0, 2.0) == pytest.approx(0.2)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_regression_fit_is_admissible_and_minimax(seed, x0):
    th = scaled_sinusoid(0.2, 3.0, c_theta=3.0)
    spec = ExperimentSpec(400, uniform_design(), linear_error(0.3), 3.0)
    s = sample_regression(th, spec, seed, validate=False)
    h = bandwidth(400, 1.0)
    gamma = holder_band(h, 3.0)
    fit = admissible_fit_regression(s, x0, h, gamma)
    lo, hi = fit.window
    sel = (s.xs >= lo) & (s.xs <= hi)
    resid = np.abs(s.ys[sel] - fit(s.xs[sel]))
    assert resid.max() <= fit.band + 1e-9
    # independent oracle: minimax absolute residual over quadratics via HiGHS
    u = s.xs[sel] - x0
    A = np.column_stack([np.ones_like(u), u, u * u / 2])
    A_ub = np.vstack([np.column_stack([-A, -np.ones(u.size)]),
                      np.column_stack([A, -np.ones(u.size)])])
    b_ub = np.concatenate([-s.ys[sel], s.ys[sel]])
    res = optimize.linprog([0, 0, 0, 1], A_ub=A_ub, b_ub=b_ub,
                           bounds=[(None, None)] * 4, method="highs")
    assert resid.max() == pytest.approx(res.x[3], abs=1e-8)


def test_regression_infeasible_spike():
    xs = np.linspace(0, 1, 201)
    ys = np.zeros_like(xs)
    ys[100] = 5.0
    s = RegressionSample(xs, ys, 201, 0, "")
    with pytest.raises(InfeasibleError):
        admissible_fit_regression(s, 0.5, 0.1, 1.0)


def test_regression_needs_points():
    s = RegressionSample(np.array([0.0, 1.0]), np.zeros(2), 2, 0, "")
    with pytest.raises(ValidationError):
        admissible_fit_regression(s, 0.5, 0.1, 1.0)


@settings(max_examples=20)
@given(st.integers(0, 5000))
def test_ppp_fit_admissible(seed):
    th = polynomial([0.1, 0.4, -0.6], c_theta=1.0)
    spec = ExperimentSpec(2000, uniform_design(), uniform_error(), 1.0)
    x1, x2 = sample_boundary_pair(th, spec, seed, block=(0.3, 0.7))
    h = bandwidth(2000, 1.0)
    fit = admissible_fit_ppp(x1, x2, 0.5, h, holder_band(h, 1.0))
    band = fit.band
    lo, hi = fit.window
    a = (x1.x >= lo) & (x1.x <= hi)
    b = (x2.x >= lo) & (x2.x <= hi)
    assert np.all(x1.y[a] <= fit(x1.x[a]) + band + 1e-9)
    assert np.all(x2.y[b] >= fit(x2.x[b]) - band - 1e-9)
    assert abs(fit.coeffs[0] - 0.15) < 0.05


def test_ppp_fit_without_lower_points_uses_min_norm():
    # only upper points well above zero: the zero quadratic is admissible and minimal
    pts = np.column_stack([np.linspace(0.4, 0.6, 20), np.full(20, 0.5)])
    fit = admissible_fit_ppp(ppp(np.zeros((0, 2)), "X1_lower_region"),
                             ppp(pts, "X2_upper_region"), 0.5, 0.1, 1.0)
    assert fit.method == "min-norm"
    np.testing.assert_allclose(fit.coeffs, 0.0, atol=1e-7)


def test_one_sided_upper_only_matches_linprog_oracle():
    rng = np.random.default_rng(5)
    x = rng.uniform(0.4, 0.6, 40)
    y = 0.2 + rng.exponential(0.02, 40)
    h, gamma, C = 0.1, 2.0, 1.0
    fit = admissible_fit_ppp(None, ppp(np.column_stack([x, y]), "X2_upper_region"),
                             0.5, h, gamma, c_theta=C)
    band = gamma * h**3
    u = x - 0.5
    # p(x_j) <= y_j + band, maximise p(0.5) over the coefficient box
    A = np.column_stack([np.ones_like(u), u, u * u / 2])
    res = optimize.linprog([-1, 0, 0], A_ub=A, b_ub=y + band,
                           bounds=[(-C, C), (-2 * C, 2 * C), (-C, C)], method="highs")
    assert fit.coeffs[0] == pytest.approx(res.x[0], abs=1e-9)
    assert fit.method == "one-sided"


def test_one_sided_needs_constant():
    with pytest.raises(ValidationError):
        admissible_fit_ppp(None, ppp([[0.5, 0.0]], "X2_upper_region"), 0.5, 0.1, 1.0)
    with pytest.raises(ValidationError):
        admissible_fit_ppp(None, None, 0.5, 0.1, 1.0, c_theta=1.0)


def test_pilot_truncation_flag():
    xs = np.linspace(0, 1, 400)
    s = RegressionSample(xs, np.full(400, 5.0), 400, 0, "")
    spec = ExperimentSpec(400, uniform_design(), uniform_error(), 1.0)
    p = pilot_estimate(s, spec, grid=[0.25, 0.5, 0.75])
    assert p.truncated and p.truncated_mask.all()
    assert np.all(p.values == 1.0)


def test_pilot_tracks_curve():
    th = scaled_sinusoid(0.2, 3.0, c_theta=3.0)
    spec = ExperimentSpec(4000, uniform_design(), uniform_error(), 3.0)
    s = sample_regression(th, spec, 2, validate=False)
    p = pilot_estimate(s, spec)
    assert not p.truncated
    assert np.max(np.abs(p.values - th.eval(p.grid))) < 0.1
    v, d = p.at(p.grid[[3, 7]])
    assert v.tolist() == p.values[[3, 7]].tolist()
    with pytest.raises(ValidationError):
        p.at([0.123456])


def test_pilot_rejects_large_bandwidth():
    s = RegressionSample(np.linspace(0, 1, 8), np.zeros(8), 8, 0, "")
    spec = ExperimentSpec(8, uniform_design(), uniform_error(), 1.0)
    with pytest.raises(ValidationError):
        pilot_estimate(s, spec)


def test_oracle_pilot_identity():
    th = polynomial([0.1, 0.2], 1.0)
    g = np.linspace(0.05, 0.95, 10)
    p = oracle_pilot(th, g)
    np.testing.assert_array_equal(p.values, th.eval(g))
    np.testing.assert_array_equal(p.derivs, np.full(10, 0.2))
    assert isinstance(p, PilotEstimate) and len(p.ident) == 16


def test_pilot_from_processes():
    th = polynomial([0.1, 0.4, -0.6], 1.0)
    spec = ExperimentSpec(3000, uniform_design(), uniform_error(), 1.0)
    x1, x2 = sample_boundary_pair(th, spec, 11)
    p = pilot_estimate((x1, x2), spec, grid=np.linspace(0.1, 0.9, 9))
    assert np.max(np.abs(p.values - th.eval(p.grid))) < 0.05
