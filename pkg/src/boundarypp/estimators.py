"""Locally admissible quadratic pilot estimators.

At a point ``x0`` with window ``U_h`` the estimator returns a quadratic
``p(x) = a0 + a1 (x - x0) + a2 (x - x0)^2 / 2`` whose band covers the local
data. Among admissible quadratics the discrete Chebyshev (minimax) fit is
selected: it minimises the largest signed constraint violation, is unique
for four or more distinct abscissae, and is admissible whenever any
quadratic is.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import _kernels, io
from .errors import InfeasibleError, NumericalError, ValidationError
from .model import holder_band
from .samplers import PointProcessRealization, RegressionSample

DERIV_CAP_FACTOR = 4.0


@dataclass(frozen=True)
class LocalPolynomial:
    """Quadratic ``a0 + a1 (x - x0) + a2 (x - x0)^2 / 2`` on a window.

    Attributes
    ----------
    coeffs : tuple of float
    center : float
    window : tuple of float
    band : float
        Half-width of the admissibility band used.
    violation : float
        Largest signed residual over the constraints (``<= band``).
    method : str
        Which solver produced the fit.
    """

    coeffs: tuple
    center: float
    window: tuple
    band: float = math.inf
    violation: float = 0.0
    method: str = "exchange"

    def __call__(self, x):
        u = np.asarray(x, dtype=float) - self.center
        a0, a1, a2 = self.coeffs
        return a0 + a1 * u + 0.5 * a2 * u * u

    def deriv(self, x):
        u = np.asarray(x, dtype=float) - self.center
        return self.coeffs[1] + self.coeffs[2] * u


@dataclass(frozen=True, eq=False)
class PilotEstimate:
    """Pilot values and slopes on a grid."""

    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    bandwidth: float
    truncated: bool
    truncated_mask: np.ndarray | None = None

    @property
    def ident(self):
        """Content hash used as ``pilot_ref``."""
        h = hashlib.sha256()
        for arr in (self.grid, self.values, self.derivs):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        h.update(repr(float(self.bandwidth)).encode())
        return h.hexdigest()[:16]

    def at(self, points):
        """Values and slopes at points that belong to the grid."""
        pts = np.asarray(points, dtype=float)
        idx = np.clip(np.searchsorted(self.grid, pts), 0, len(self.grid) - 1)
        left = np.clip(idx - 1, 0, len(self.grid) - 1)
        pick = np.where(np.abs(self.grid[left] - pts) < np.abs(self.grid[idx] - pts), left, idx)
        if pts.size and np.max(np.abs(self.grid[pick] - pts)) > 1e-12:
            raise ValidationError("pilot is not defined at the requested points")
        return self.values[pick], self.derivs[pick]

    def to_csv(self, path):
        mask = (self.truncated_mask if self.truncated_mask is not None
                else np.zeros(len(self.grid), dtype=bool))
        rows = ([float(x), float(v), float(d), float(self.bandwidth), int(t)]
                for x, v, d, t in zip(self.grid, self.values, self.derivs, mask))
        return io.write_csv(path, {"kind": "pilot", "h": io.fmt(self.bandwidth)},
                            ["x", "theta_hat", "dtheta_hat", "h", "truncated"], rows)


def window(x0, h):
    """Estimation window ``U_h`` around ``x0``.

    Examples
    --------
    >>> window(0.5, 0.1)
    (0.4, 0.6)
    >>> window(0.05, 0.1)
    (0.0, 0.2)
    """
    if not (0.0 < h <= 0.5):
        raise ValidationError("bandwidth must lie in (0, 1/2]")
    if x0 < 0 or x0 > 1:
        raise ValidationError("x0 must lie in [0, 1]")
    if x0 < h:
        return (0.0, 2.0 * h)
    if x0 > 1.0 - h:
        return (1.0 - 2.0 * h, 1.0)
    return (x0 - h, x0 + h)


def bandwidth(n, alpha=1.0, const=1.0):
    """``h = const * n^{-1/(3+alpha)}``."""
    if n <= 0:
        raise ValidationError("bandwidth needs n > 0")
    return float(const) * float(n) ** (-1.0 / (3.0 + alpha))


# ---------------------------------------------------------------------------
# Linear-programming core
# ---------------------------------------------------------------------------

_PATTERN = (-1.0, 1.0, -1.0, 1.0)


def _initial_reference(v, sigma):
    """Four constraints with increasing abscissae and signs ``(-, +, -, +)``.

    Such a reference is a feasible basis of the dual program; it exists iff
    the minimax problem is bounded (for distinct abscissae).
    """
    if v.size < 4:
        return None
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return None
    # fast path: one constraint per quarter of the range
    q = np.minimum(((v - lo) / (hi - lo) * 4).astype(np.int64), 3)
    pick = []
    for k, s in enumerate(_PATTERN):
        cand = np.flatnonzero((q == k) & (sigma == s))
        if cand.size == 0:
            break
        pick.append(int(cand[np.argmin(np.abs(v[cand] - (lo + (k + 0.5) * (hi - lo) / 4)))]))
    if len(pick) == 4:
        return pick
    # greedy scan in abscissa order finds a reference whenever one exists
    order = np.argsort(v, kind="stable")
    pick, last, k = [], -np.inf, 0
    for i in order:
        if sigma[i] == _PATTERN[k] and v[i] > last:
            pick.append(int(i))
            last = v[i]
            k += 1
            if k == 4:
                return pick
    return None


def _linprog_minimax(v, y, sigma):
    """Reference solver: ``min t`` s.t. ``sigma (y - p(v)) <= t`` via HiGHS."""
    A = -sigma[:, None] * np.column_stack([np.ones_like(v), v, 0.5 * v * v])
    A = np.column_stack([A, -np.ones_like(v)])
    res = optimize.linprog(c=[0, 0, 0, 1.0], A_ub=A, b_ub=-sigma * y,
                           bounds=[(None, None)] * 4, method="highs")
    if res.status == 3:
        return None
    if res.status != 0:
        raise NumericalError(f"linear program failed: {res.message}")
    return res.x[:3], float(res.x[3])


def chebyshev_fit(v, y, sigma, use_kernel=True):
    """Minimax coefficients ``(b0, b1, b2)`` and level ``t`` in scaled units.

    Returns ``None`` when the problem is unbounded below.
    """
    v = np.ascontiguousarray(v, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    sigma = np.ascontiguousarray(sigma, dtype=float)
    basis = _initial_reference(v, sigma) if use_kernel else None
    if basis is not None:
        b0, b1, b2, t, _, status = _kernels.minimax_fit(v, y, sigma, basis)
        if status == _kernels.OPTIMAL:
            return np.array([b0, b1, b2]), float(t), "exchange"
    out = _linprog_minimax(v, y, sigma) if v.size else None
    if out is None:
        return None
    return out[0], out[1], "linprog"


def _min_norm(v, y, sigma, band, h):
    """Admissible quadratic of smallest Euclidean coefficient norm."""
    if v.size == 0:
        return np.zeros(3)
    scale = np.array([1.0, 1.0 / h, 1.0 / h**2])
    basis = sigma[:, None] * np.column_stack([np.ones_like(v), v, 0.5 * v * v])
    # constraint: band - sigma (y - p) >= 0, p in scaled coefficients b, a = b * scale
    cons = {"type": "ineq",
            "fun": lambda b: band - sigma * y + basis @ b,
            "jac": lambda b: basis}
    res = optimize.minimize(lambda b: float(np.sum((b * scale) ** 2)),
                            x0=np.zeros(3), jac=lambda b: 2 * b * scale**2,
                            constraints=[cons], method="SLSQP",
                            options={"maxiter": 500, "ftol": 1e-14})
    return res.x


def _finish(b, h, x0, win, band, v, y, sigma, method):
    viol = float(np.max(sigma * (y - (b[0] + b[1] * v + 0.5 * b[2] * v * v)))) if v.size else -math.inf
    if viol > band + 1e-9 * max(1.0, abs(band)):
        raise InfeasibleError(
            f"no admissible quadratic at x0={x0}: minimal violation {viol:.6g} > band {band:.6g}",
            residual=viol - band)
    coeffs = (float(b[0]), float(b[1] / h), float(b[2] / h**2))
    return LocalPolynomial(coeffs, float(x0), win, float(band), viol, method)


def admissible_fit_regression(sample: RegressionSample, x0, h, gamma, alpha=1.0):
    """Locally admissible quadratic for regression data.

    Parameters
    ----------
    sample : RegressionSample
    x0 : float
        Evaluation point.
    h : float
        Bandwidth in ``(0, 1/2]``.
    gamma : float
        Band constant; the band is ``1 + gamma * h^(2+alpha)``.
    alpha : float

    Returns
    -------
    LocalPolynomial

    Raises
    ------
    InfeasibleError
        If even the minimax quadratic violates the band.
    """
    win = window(x0, h)
    xs, ys = np.asarray(sample.xs), np.asarray(sample.ys)
    i0, i1 = np.searchsorted(xs, win[0], "left"), np.searchsorted(xs, win[1], "right")
    if not np.all(np.diff(xs) >= 0):
        sel = np.flatnonzero((xs >= win[0]) & (xs <= win[1]))
        xw, yw = xs[sel], ys[sel]
    else:
        xw, yw = xs[i0:i1], ys[i0:i1]
    if xw.size < 3:
        raise ValidationError(f"fewer than 3 design points in window {win}")
    band = 1.0 + gamma * h ** (2.0 + alpha)
    v = np.repeat((xw - x0) / h, 2)
    yy = np.repeat(yw, 2)
    sigma = np.tile([1.0, -1.0], xw.size)
    fit = chebyshev_fit(v, yy, sigma)
    if fit is None:  # pragma: no cover - impossible with >= 3 distinct points
        raise NumericalError("regression minimax program unbounded")
    b, _, method = fit
    return _finish(b, h, x0, win, band, v, yy, sigma, method)


def _window_points(real, win):
    if real is None or len(real) == 0:
        return np.zeros(0), np.zeros(0)
    x, y = real.x, real.y
    if isinstance(real, _SortedPoints):
        i, j = np.searchsorted(x, win[0], "left"), np.searchsorted(x, win[1], "right")
        return x[i:j], y[i:j]
    sel = (x >= win[0]) & (x <= win[1])
    return x[sel], y[sel]


def admissible_fit_ppp(x1, x2, x0, h, gamma, alpha=1.0, c_theta=None):
    """Locally admissible quadratic for a pair of boundary processes.

    No point of ``x1`` may lie above ``p + band`` and no point of ``x2``
    below ``p - band`` inside the window, with ``band = gamma h^(2+alpha)``.

    With both processes supplied the minimax-margin quadratic is returned;
    if that program is unbounded (e.g. one side has no points in the
    window) the admissible quadratic of smallest coefficient norm is
    returned instead. With only one process (the other ``None``) the
    one-sided rule applies: with ``x2`` alone the largest admissible value
    at ``x0`` is returned, with ``x1`` alone the smallest, over quadratics
    whose coefficients respect the class bounds ``|a0| <= C``,
    ``|a1| <= 2C``, ``|a2| <= C`` (``c_theta`` is then required).
    """
    win = window(x0, h)
    band = gamma * h ** (2.0 + alpha)
    xa, ya = _window_points(x1, win)
    xb, yb = _window_points(x2, win)
    v = np.concatenate([(xa - x0) / h, (xb - x0) / h])
    y = np.concatenate([ya, yb])
    sigma = np.concatenate([np.ones(xa.size), -np.ones(xb.size)])
    if x1 is None or x2 is None:
        if x1 is None and x2 is None:
            raise ValidationError("at least one process is required")
        if c_theta is None:
            raise ValidationError("one-sided fits need c_theta for the coefficient box")
        b = _one_sided(v, y, sigma, band, h, c_theta, largest=(x1 is None))
        return _finish(b, h, x0, win, band, v, y, sigma, "one-sided")
    fit = chebyshev_fit(v, y, sigma) if v.size else None
    if fit is None:
        b = _min_norm(v, y, sigma, band, h)
        return _finish(b, h, x0, win, band, v, y, sigma, "min-norm")
    b, _, method = fit
    return _finish(b, h, x0, win, band, v, y, sigma, method)


def _one_sided(v, y, sigma, band, h, c_theta, largest):
    A = sigma[:, None] * np.column_stack([np.ones_like(v), v, 0.5 * v * v])
    # sigma (y - p) <= band  <=>  -sigma p <= band - sigma y
    bounds = [(-c_theta, c_theta), (-2 * c_theta * h, 2 * c_theta * h),
              (-c_theta * h**2, c_theta * h**2)]
    c = [-1.0, 0.0, 0.0] if largest else [1.0, 0.0, 0.0]
    res = optimize.linprog(c=c, A_ub=-A if v.size else None,
                           b_ub=(band - sigma * y) if v.size else None,
                           bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleError("one-sided admissible set is empty")
    if res.status != 0:
        raise NumericalError(f"one-sided linear program failed: {res.message}")
    return res.x


# ---------------------------------------------------------------------------
# Pilot estimate on a grid
# ---------------------------------------------------------------------------


def _effective_n(data, n):
    if n is not None:
        return float(n)
    if isinstance(data, RegressionSample):
        return float(len(data))
    x1, x2 = data
    ref = x1 if x1 is not None else x2
    return float(ref.scale)


def pilot_estimate(data, spec, bandwidth_const=1.0, grid=None, gamma=None, n=None):
    """Pilot values and slopes with truncation.

    Parameters
    ----------
    data : RegressionSample or tuple of PointProcessRealization
        Regression data, or ``(X1, X2)`` (either may be ``None`` for the
        one-sided rule).
    spec : ExperimentSpec
        Supplies ``C_Theta`` and ``alpha``.
    bandwidth_const : float
        ``h = bandwidth_const * n^{-1/(3+alpha)}``.
    grid : array_like, optional
        Evaluation points; defaults to the centres of the default blocks.
    gamma : float, optional
        Band constant, default :func:`holder_band`.
    n : float, optional
        Effective sample size; defaults to the number of observations or
        the process scale.

    Returns
    -------
    PilotEstimate
    """
    from .equivalence import default_block_count

    n_eff = _effective_n(data, n)
    h = bandwidth(n_eff, spec.alpha, bandwidth_const)
    if h > 0.5:
        raise ValidationError(f"bandwidth {h:.3g} exceeds 1/2; increase n or lower the constant")
    if grid is None:
        m = default_block_count(max(int(n_eff), 1), spec.alpha)
        grid = (np.arange(m) + 0.5) / m
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValidationError("pilot grid must be sorted")
    C = spec.c_theta
    gamma = holder_band(h, C) if gamma is None else float(gamma)
    vals = np.empty(grid.size)
    ders = np.empty(grid.size)
    if isinstance(data, RegressionSample):
        fit = lambda x0: admissible_fit_regression(data, x0, h, gamma, spec.alpha)  # noqa: E731
    else:
        x1, x2 = data
        x1s, x2s = _sorted_view(x1), _sorted_view(x2)
        fit = lambda x0: admissible_fit_ppp(x1s, x2s, x0, h, gamma, spec.alpha, C)  # noqa: E731
    for i, x0 in enumerate(grid):
        p = fit(float(x0))
        vals[i], ders[i] = p.coeffs[0], p.coeffs[1]
    cap = DERIV_CAP_FACTOR * C
    mask = (np.abs(vals) > C) | (np.abs(ders) > cap)
    vals = np.clip(vals, -C, C)
    ders = np.clip(ders, -cap, cap)
    return PilotEstimate(grid, vals, ders, h, bool(mask.any()), mask)


class _SortedPoints:
    """Window lookups by binary search on x-sorted points."""

    def __init__(self, real):
        order = np.argsort(real.x, kind="stable")
        self._x = real.x[order]
        self._y = real.y[order]
        self.scale = real.scale

    def __len__(self):
        return self._x.size

    @property
    def x(self):
        return self._x

    @property
    def y(self):
        return self._y


def _sorted_view(real):
    return None if real is None else _SortedPoints(real)


def oracle_pilot(theta, grid, bandwidth_value=0.0):
    """Pilot that returns the true values and slopes (isolation testing)."""
    grid = np.asarray(grid, dtype=float)
    return PilotEstimate(grid, np.asarray(theta.eval(grid), dtype=float),
                         np.asarray(theta.deriv1(grid), dtype=float),
                         float(bandwidth_value), False, np.zeros(grid.size, dtype=bool))


def fit_or_none(fn, *args, **kwargs):
    """Call a fit and convert infeasibility into ``None`` with a warning."""
    try:
        return fn(*args, **kwargs)
    except InfeasibleError as exc:
        warnings.warn(str(exc), RuntimeWarning, stacklevel=2)
        return None
