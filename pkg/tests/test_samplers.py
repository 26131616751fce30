"""Regression and Poisson samplers."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from boundarypp.errors import NumericalError, ValidationError
from boundarypp.model import (ExperimentSpec, figure1_parameter, linear_design, linear_error,
                              polynomial, scaled_sinusoid, uniform_design, uniform_error,
                              zero_function)
from boundarypp.samplers import (Band, BelowLine, IntensityFunction, PointProcessRealization,
                                 RegressionSample, boundary_intensities, integrate_1d,
                                 line_region_area, sample_boundary_pair, sample_line_blocks,
                                 sample_ppp, sample_ppp_sequential, sample_regression)


def test_figure1_regression_residuals_are_uniform():
    # 100 equidistant observations with uniform noise on [-1, 1]
    th = figure1_parameter()
    spec = ExperimentSpec(100, uniform_design(), uniform_error(), th.c_theta)
    s = sample_regression(th, spec, seed=1)
    assert len(s) == 100 and s.xs[0] == 0.0 and s.xs[-1] == 1.0
    resid = s.ys - th.eval(s.xs)
    assert np.all(np.abs(resid) <= 1.0)
    assert stats.kstest(resid, stats.uniform(-1, 2).cdf).statistic < 1.628 / math.sqrt(100)


def test_regression_rejects_invalid_curve():
    spec = ExperimentSpec(50, uniform_design(), uniform_error(), 3.0)
    with pytest.raises(ValidationError):
        sample_regression(scaled_sinusoid(0.3, 10.0, 3.0), spec, 0)


def test_regression_reproducible_and_csv_round_trip(tmp_path):
    th = polynomial([0.1, -0.2], 1.0)
    spec = ExperimentSpec(64, linear_design(0.5), linear_error(0.3), 1.0)
    a = sample_regression(th, spec, 9)
    b = sample_regression(th, spec, 9)
    assert a.ys.tobytes() == b.ys.tobytes()
    p = a.to_csv(tmp_path / "s.csv")
    c = RegressionSample.from_csv(p)
    assert c.xs.tobytes() == a.xs.tobytes() and c.ys.tobytes() == a.ys.tobytes()
    assert c.index.tolist() == list(range(1, 65))


def test_ppp_csv_round_trip(tmp_path):
    th = polynomial([0.1], 1.0)
    spec = ExperimentSpec(30, uniform_design(), uniform_error(), 1.0)
    x1, _ = sample_boundary_pair(th, spec, 4)
    y = PointProcessRealization.from_csv(x1.to_csv(tmp_path / "x.csv"))
    assert y.points.tobytes() == x1.points.tobytes()
    assert (y.scale, y.domain, y.process_tag) == (x1.scale, x1.domain, x1.process_tag)


def test_ppp_mass_matches_analytic():
    # region below theta = 0.2 + 0.1 x inside [-2, 2], n = 10, phi(1) = 1/2
    th = polynomial([0.2, 0.1], 1.0)
    spec = ExperimentSpec(10, uniform_design(), uniform_error(), 1.0)
    lam1, lam2 = boundary_intensities(th, spec)
    assert lam1.mass == pytest.approx(10 * 0.5 * (2.2 + 0.05), rel=1e-12)
    assert lam2.mass == pytest.approx(10 * 0.5 * (1.8 - 0.05), rel=1e-12)


def test_ppp_counts_and_support():
    th = scaled_sinusoid(0.3, 4.0, 2.0)
    spec = ExperimentSpec(20, linear_design(1.0), linear_error(0.5), 2.0)
    lam1, lam2 = boundary_intensities(th, spec)
    counts = []
    for r in range(400):
        x = sample_ppp(lam1, 1000 + r, "X1_lower_region")
        assert np.all(x.y <= th.eval(x.x) + 1e-12) and x.in_domain()
        counts.append(len(x))
    counts = np.array(counts)
    assert abs(counts.mean() - lam1.mass) < 4 * math.sqrt(lam1.mass / 400)
    assert counts.var(ddof=1) == pytest.approx(lam1.mass, rel=0.2)


def test_ppp_x_marginal_follows_design_weighted_height():
    th = zero_function(1.0)
    spec = ExperimentSpec(400, linear_design(2.0), uniform_error(), 1.0)
    lam1, _ = boundary_intensities(th, spec)
    x = sample_ppp(lam1, 3, "X1_lower_region")
    # constant height: x ~ f_D
    assert stats.kstest(x.x, lambda t: spec.design.cdf(np.asarray(t))).pvalue > 1e-3


def test_sequential_sampler_agrees_with_rejection():
    th = polynomial([0.1, 0.3, -0.2], 1.0)
    spec = ExperimentSpec(15, uniform_design(), linear_error(0.4), 1.0)
    lam1, lam2 = boundary_intensities(th, spec)
    for side, lam in (("lower", lam1), ("upper", lam2)):
        seq = np.array([len(sample_ppp_sequential(th, spec, side, r)) for r in range(400)])
        assert abs(seq.mean() - lam.mass) < 4 * math.sqrt(lam.mass / 400)
    x = sample_ppp_sequential(th, spec, "lower", 5)
    assert np.all(x.y <= th.eval(x.x) + 1e-12)


def test_extreme_per_block_law_zero_curve():
    # theta = 0 and n * phi(1) = 100: the block maximum of the lower process
    # has P[max <= y] = exp(-100 * (0 - y) * |block|) for y <= 0
    spec = ExperimentSpec(200, uniform_design(), uniform_error(), 1.0)
    lam1, _ = boundary_intensities(zero_function(1.0), spec)
    m, pits = 10, []
    for r in range(200):
        x = sample_ppp(lam1, r, "X1_lower_region")
        k = np.minimum((x.x * m).astype(int), m - 1)
        for b in range(m):
            ys = x.y[k == b]
            assert ys.size > 0
            pits.append(math.exp(-100 * (0 - ys.max()) / m))
    assert stats.kstest(pits, "uniform").statistic < 1.63 / math.sqrt(len(pits)) * 1.5


@given(st.floats(-2, 2), st.floats(-5, 5), st.floats(0.05, 0.5), st.booleans())
def test_line_region_area_matches_quadrature(level, slope, width, below):
    a, b = 0.3, 0.3 + width
    c = 0.5 * (a + b)
    y_lo, y_hi = -1.5, 1.5

    def h(x):
        line = level + slope * (x - c)
        if below:
            return max(0.0, min(line, y_hi) - y_lo)
        return max(0.0, y_hi - max(line, y_lo))

    root = [p for p in ((y_lo - level) / slope + c, (y_hi - level) / slope + c)
            if a < p < b] if slope else []
    ref, _ = integrate.quad(h, a, b, points=root or None, epsabs=1e-13)
    got = float(line_region_area(np.array([a]), np.array([b]), level, slope, c, y_lo, y_hi, below)[0])
    assert got == pytest.approx(ref, abs=1e-10)


def test_sample_line_blocks_exact_counts_and_region(rng):
    m = 7
    e = np.arange(m + 1) / m
    a, b = e[:-1], e[1:]
    level = rng.uniform(-0.5, 0.5, m)
    slope = rng.uniform(-3, 3, m)
    center = 0.5 * (a + b)
    counts = rng.integers(0, 40, m)
    for below in (True, False):
        pts, blk = sample_line_blocks(rng, counts, a, b, level, slope, center, -2.0, 2.0, below)
        assert np.bincount(blk, minlength=m).tolist() == counts.tolist()
        line = level[blk] + slope[blk] * (pts[:, 0] - center[blk])
        assert np.all((pts[:, 1] <= line) if below else (pts[:, 1] >= line))
        assert np.all((pts[:, 0] >= a[blk]) & (pts[:, 0] <= b[blk]))


def test_band_and_line_intensity_masses():
    d = uniform_design()
    lam = IntensityFunction(d, Band(-0.5, 0.25), 3.0, (-1, 1))
    assert lam.mass == pytest.approx(3.0 * 0.75)
    lam = IntensityFunction(d, BelowLine(0.0, 1.0, 0.5), 2.0, (-1, 1), (0.2, 0.8))
    assert lam.mass == pytest.approx(2.0 * 0.6 * 1.0)


def test_integrate_1d_reports_failure():
    with pytest.raises(NumericalError):
        integrate_1d(lambda x: np.full_like(x, np.nan), 0.0, 1.0)
    v, _ = integrate_1d(lambda x: np.abs(x - 0.3), 0.0, 1.0, [0.3])
    assert v == pytest.approx(0.5 * (0.09 + 0.49), abs=1e-13)


def test_unbounded_region_rejected():
    lam = IntensityFunction(uniform_design(), BelowLine(0.0, 0.0, 0.5), 1.0)
    with pytest.raises(ValidationError):
        lam.mass
