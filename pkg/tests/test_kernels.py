"""Compiled and pure-Python kernels against each other and against HiGHS."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

import boundarypp
from boundarypp import _kernels
from boundarypp._kernels import _pykernels
from boundarypp.estimators import _initial_reference

try:
    from boundarypp._kernels import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


def highs_minimax(v, y, sigma):
    # independent oracle: min t s.t. sigma_j (y_j - p(v_j)) <= t
    A = np.column_stack([-sigma, -sigma * v, -sigma * v * v / 2, -np.ones_like(v)])
    res = optimize.linprog([0, 0, 0, 1], A_ub=A, b_ub=-sigma * y,
                           bounds=[(None, None)] * 4, method="highs")
    return res


def random_problem(rng, k):
    v = np.sort(rng.uniform(-1, 1, k))
    y = rng.normal(size=k)
    sigma = rng.choice([-1.0, 1.0], k)
    return v, y, sigma


@pytest.mark.skipif(os.environ.get("BOUNDARYPP_PURE_PYTHON", "").strip() not in ("", "0"),
                    reason="fallback forced by environment")
def test_compiled_backend_is_default():
    assert _ckernels is not None, "compiled extension did not build"
    assert boundarypp.BACKEND == "cython"


def test_env_var_selects_fallback():
    env = dict(os.environ, BOUNDARYPP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import boundarypp; print(boundarypp.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_minimax_matches_highs(mod, rng):
    for _ in range(150):
        v, y, sigma = random_problem(rng, int(rng.integers(6, 300)))
        basis = _initial_reference(v, sigma)
        if basis is None:
            continue
        b0, b1, b2, t, iters, status = mod.minimax_fit(v, y, sigma, basis)
        assert status == _kernels.OPTIMAL
        ref = highs_minimax(v, y, sigma)
        assert ref.status == 0
        assert t == pytest.approx(ref.x[3], abs=1e-9)
        # the returned quadratic attains its level
        resid = sigma * (y - (b0 + b1 * v + b2 * v * v / 2))
        assert resid.max() == pytest.approx(t, abs=1e-9)


@pytest.mark.skipif(_ckernels is None, reason="no compiled backend")
def test_backends_agree_bitwise_on_status_and_closely_on_values(rng):
    for _ in range(100):
        v, y, sigma = random_problem(rng, 80)
        basis = _initial_reference(v, sigma)
        if basis is None:
            continue
        a = _pykernels.minimax_fit(v, y, sigma, basis)
        c = _ckernels.minimax_fit(v, y, sigma, basis)
        assert a[5] == c[5]
        np.testing.assert_allclose(a[:4], c[:4], atol=1e-11)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_exact_quadratic_has_zero_level(mod):
    v = np.linspace(-1, 1, 41)
    y = 0.3 - 0.2 * v + 0.7 * v * v / 2
    sigma = np.where(np.arange(41) % 2 == 0, 1.0, -1.0)
    b0, b1, b2, t, _, status = mod.minimax_fit(v, y, sigma, _initial_reference(v, sigma))
    assert status == _kernels.OPTIMAL
    assert t == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose([b0, b1, b2], [0.3, -0.2, 0.7], atol=1e-10)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@given(st.lists(st.tuples(st.integers(0, 9), st.floats(-1e6, 1e6, allow_nan=False)),
                max_size=60))
def test_block_extrema_matches_naive(mod, pairs):
    m = 10
    idx = np.array([p[0] for p in pairs], dtype=np.int64)
    vals = np.array([p[1] for p in pairs], dtype=float)
    mins, maxs, counts = mod.block_extrema(idx, vals, m)
    for k in range(m):
        sel = vals[idx == k]
        assert counts[k] == sel.size
        if sel.size:
            assert mins[k] == sel.min() and maxs[k] == sel.max()
        else:
            assert mins[k] == np.inf and maxs[k] == -np.inf


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_block_extrema_rejects_bad_index(mod):
    with pytest.raises((IndexError, ValueError)):
        mod.block_extrema(np.array([0, 5], dtype=np.int64), np.array([1.0, 2.0]), 3)
