"""Splitting, exact shifts, block extremes and the two-pass transform."""
import inspect
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boundarypp.equivalence import (BlockPartition, block_extremes, block_index,
                                    default_block_count, exact_shift, exact_unshift,
                                    forward_transform, localize, merge, randomize_to_ppp,
                                    split_sample, superpose, thin_ppp, unlocalize)
from boundarypp.errors import ValidationError
from boundarypp.estimators import oracle_pilot
from boundarypp.model import (ExperimentSpec, linear_design, linear_error, one_sided_error,
                              polynomial, step_function, uniform_design, uniform_error)
from boundarypp.samplers import (PointProcessRealization, RegressionSample, boundary_intensities,
                                 sample_regression)

finite = st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False)


def make_sample(n=200, seed=0, spec=None):
    spec = spec or ExperimentSpec(n, linear_design(0.4), linear_error(0.2), 1.0)
    th = polynomial([0.1, 0.3, -0.4], 1.0)
    return sample_regression(th, spec, seed, validate=False), spec, th


def test_default_block_count():
    assert default_block_count(10_000, 1.0) == 147
    assert default_block_count(1000, 0.1) == math.ceil(1000 ** (2 / 3 - 0.05))


def test_block_index_edges():
    assert block_index([0.0, 0.0999, 0.1, 0.95, 1.0], 10).tolist() == [0, 0, 1, 9, 9]


def test_split_merge_round_trip():
    s, _, _ = make_sample()
    a, b = split_sample(s)
    assert a.index.tolist() == list(range(1, 201, 2))
    assert b.index.tolist() == list(range(2, 201, 2))
    back = merge(a, b)
    assert back.xs.tobytes() == s.xs.tobytes() and back.ys.tobytes() == s.ys.tobytes()


def test_split_rejects_odd():
    s = RegressionSample(np.linspace(0, 1, 5), np.zeros(5), 5, 0, "")
    with pytest.raises(ValidationError):
        split_sample(s)


@given(st.lists(finite, min_size=1, max_size=30), st.lists(finite, min_size=1, max_size=30))
def test_exact_shift_is_bitwise_invertible(vals, offs):
    k = min(len(vals), len(offs))
    v, o = np.array(vals[:k]), np.array(offs[:k])
    s, c = exact_shift(v, o)
    assert exact_unshift(s, c, o).tobytes() == v.tobytes()
    # the carry is the exact rounding error of the subtraction
    assert np.all(np.abs(c) <= np.abs(np.spacing(s)))


def test_localize_undo_bitwise():
    s, spec, th = make_sample()
    a, _ = split_sample(s)
    part = BlockPartition.build(a.xs, 10, a.index)
    pilot = oracle_pilot(th, part.centers)
    loc = localize(a, pilot, part)
    assert unlocalize(a, loc).ys.tobytes() == a.ys.tobytes()
    # residuals are small for the true curve
    assert np.max(np.abs(np.asarray(loc))) < 1.0 + 0.05


def test_block_extremes_and_recentering():
    s, spec, th = make_sample()
    part = BlockPartition.build(s.xs, 12)
    pilot = oracle_pilot(th, part.centers)
    z = np.asarray(localize(s, pilot, part))
    st_ = block_extremes(z, part, pilot)
    for k in range(12):
        sel = z[part.index_map == k]
        assert st_.s[k] == sel.min() and st_.S[k] == sel.max() and st_.counts[k] == sel.size
    s_back, S_back = st_.undo_recentering()
    assert s_back.tobytes() == st_.s.tobytes() and S_back.tobytes() == st_.S.tobytes()
    np.testing.assert_allclose(st_.s_recentered, st_.s + pilot.values + 1, atol=1e-15)


def test_block_extremes_empty_block():
    xs = np.linspace(0, 0.4, 10)
    part = BlockPartition.build(xs, 4)
    with pytest.raises(ValidationError):
        block_extremes(np.zeros(10), part)


def test_first_index_is_smallest_observation():
    xs = np.array([0.1, 0.6, 0.2, 0.7])
    part = BlockPartition.build(xs, 2, np.array([5, 2, 1, 9]))
    assert part.first_index.tolist() == [1, 2]


def test_randomization_geometry():
    s, spec, th = make_sample(400)
    part = BlockPartition.build(s.xs, 8)
    pilot = oracle_pilot(th, part.centers)
    st_ = block_extremes(localize(s, pilot, part), part, pilot)
    xl, xu = randomize_to_ppp(st_, pilot, part, spec, seed=3)
    for x, lower in ((xl, True), (xu, False)):
        assert x.scale == 200.0 and x.in_domain()
        ext = x.marks["extreme"] == 1
        assert ext.sum() == 8
        k = block_index(x.x, 8)
        level = st_.S_recentered if lower else st_.s_recentered
        line = level[k] + pilot.derivs[k] * (x.x - part.centers[k])
        np.testing.assert_allclose(x.y[ext], line[ext], atol=1e-12)
        cloud = ~ext
        assert np.all(x.y[cloud] <= line[cloud] + 1e-12 if lower else x.y[cloud] >= line[cloud] - 1e-12)


def test_one_sided_error_drops_lower_side():
    spec = ExperimentSpec(200, uniform_design(), one_sided_error(), 1.0)
    s, _, th = make_sample(200, spec=spec)
    part = BlockPartition.build(s.xs, 5)
    pilot = oracle_pilot(th, part.centers)
    st_ = block_extremes(localize(s, pilot, part), part, pilot)
    xl, xu = randomize_to_ppp(st_, pilot, part, spec, seed=1)
    assert xl is None and len(xu) > 0


def test_superpose_and_thin_conserve_counts():
    pts = np.random.default_rng(0).uniform(0, 1, (50, 2))
    x = PointProcessRealization(pts, "X_l", 10.0, 0, 4.0, (-1.0, 2.0), marks={"pass": np.ones(50, int)})
    a, b = thin_ppp(x, 0.3, seed=5)
    assert len(a) + len(b) == 50 and a.scale + b.scale == pytest.approx(4.0)
    merged = superpose(a, b)
    assert len(merged) == 50 and merged.scale == pytest.approx(4.0)
    assert sorted(map(tuple, merged.points)) == sorted(map(tuple, pts))
    other = PointProcessRealization(pts, "X_l", 1.0, 0, 1.0, (-2.0, 2.0))
    with pytest.raises(ValidationError):
        superpose(x, other)
    with pytest.raises(ValidationError):
        thin_ppp(x, 1.5, 0)


def test_transform_never_takes_the_curve():
    params = set(inspect.signature(forward_transform).parameters)
    assert not params & {"theta", "curve", "parameter"}


def test_transform_reproducible_and_seed_sensitive():
    s, spec, _ = make_sample(2000)
    a1, a2 = forward_transform(s, spec, 7)
    b1, b2 = forward_transform(s, spec, 7)
    c1, _ = forward_transform(s, spec, 8)
    assert a1.points.tobytes() == b1.points.tobytes()
    assert a2.points.tobytes() == b2.points.tobytes()
    assert a1.points.tobytes() != c1.points.tobytes()
    assert a1.process_tag == "X1_lower_region" and a2.process_tag == "X2_upper_region"
    assert a1.scale == 2000.0 and set(np.unique(a1.marks["pass"])) == {1, 2}


@settings(max_examples=10)
@given(st.integers(0, 1000))
def test_transform_oracle_counts_match_mass(seed):
    n, m = 2000, 20
    spec = ExperimentSpec(n, uniform_design(), uniform_error(), 1.0)
    th = step_function(np.random.default_rng(seed).uniform(-0.5, 0.5, m).tolist(), 1.0)
    s = sample_regression(th, spec, seed, validate=False)
    x1, x2 = forward_transform(s, spec, seed, m=m, pilot_override=lambda c: oracle_pilot(th, c))
    lam1, lam2 = boundary_intensities(th, spec)
    for x, lam in ((x1, lam1), (x2, lam2)):
        assert abs(len(x) - lam.mass) < 6 * math.sqrt(lam.mass)


def test_transform_info():
    s, spec, _ = make_sample(1000)
    _, _, info = forward_transform(s, spec, 1, return_info=True)
    d = info.to_dict()
    assert d["m"] == default_block_count(1000) and set(d["seeds"]) == {"pass1", "pass2"}
