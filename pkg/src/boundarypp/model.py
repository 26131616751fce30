"""Parameter space, design and error-density specifications.

All objects are immutable and evaluate vectorised over NumPy arrays.
Built-in families are constructed by name so that configurations can be
serialised as plain key/value tables.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError

ArrayFn = Callable[[np.ndarray], np.ndarray]

#: Grid size used by every numerical invariant check.
DEFAULT_GRID = 10_000
#: Relative tolerance used by every numerical invariant check.
REL_TOL = 1e-6
#: Resolution of the tabulated error quantile function.
ERROR_TABLE_SIZE = 2**14


def _arr(x):
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# Parameter functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParameterFunction:
    """A regression/boundary curve together with its class constants.

    Parameters
    ----------
    eval, deriv1, deriv2 : callable
        Vectorised value, first and second derivative.
    c_theta : float
        Declared bound ``C_Theta``.
    alpha : float
        Hoelder exponent of the second derivative, in ``(0, 1]``.
    family_tag : str
        Name of the built-in family (``"custom"`` for user callables).
    params : mapping
        Numeric parameters that rebuild the function via
        :func:`make_parameter`.
    breakpoints : tuple of float
        Points where the curve may be non-smooth; passed to quadrature.
    """

    eval: ArrayFn
    deriv1: ArrayFn
    deriv2: ArrayFn
    c_theta: float
    alpha: float = 1.0
    family_tag: str = "custom"
    params: Mapping = field(default_factory=dict)
    breakpoints: tuple = ()

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.c_theta < 0:
            raise ValidationError("c_theta must be nonnegative")

    def __call__(self, x):
        return self.eval(_arr(x))

    def to_dict(self):
        if self.family_tag == "custom":
            raise ValidationError("custom parameter functions are not serialisable")
        return {"family": self.family_tag, "c_theta": self.c_theta,
                "alpha": self.alpha, **dict(self.params)}


def polynomial(coeffs, c_theta, alpha=1.0):
    """Polynomial ``sum_k coeffs[k] * x**k``."""
    p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    d1, d2 = p.deriv(1), p.deriv(2)
    return ParameterFunction(
        eval=lambda x: p(_arr(x)),
        deriv1=lambda x: d1(_arr(x)),
        deriv2=lambda x: d2(_arr(x)),
        c_theta=float(c_theta), alpha=alpha, family_tag="polynomial",
        params={"coeffs": [float(c) for c in coeffs]},
    )


def scaled_sinusoid(c, omega, c_theta, alpha=1.0):
    """The family ``theta(x) = c * x * cos(omega * x)``."""
    c, omega = float(c), float(omega)

    def f(x):
        x = _arr(x)
        return c * x * np.cos(omega * x)

    def f1(x):
        x = _arr(x)
        return c * np.cos(omega * x) - c * omega * x * np.sin(omega * x)

    def f2(x):
        x = _arr(x)
        return -2.0 * c * omega * np.sin(omega * x) - c * omega**2 * x * np.cos(omega * x)

    return ParameterFunction(f, f1, f2, c_theta=float(c_theta), alpha=alpha,
                             family_tag="scaled-sinusoid",
                             params={"c": c, "omega": omega})


def custom_grid(grid, values, c_theta, alpha=1.0):
    """Cubic-spline interpolant of tabulated values."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size < 4 or np.any(np.diff(grid) <= 0):
        raise ValidationError("custom grid must be strictly increasing with >= 4 points")
    cs = CubicSpline(grid, values)
    d1, d2 = cs.derivative(1), cs.derivative(2)
    return ParameterFunction(
        eval=lambda x: cs(_arr(x)), deriv1=lambda x: d1(_arr(x)),
        deriv2=lambda x: d2(_arr(x)), c_theta=float(c_theta), alpha=alpha,
        family_tag="custom-grid",
        params={"grid": grid.tolist(), "values": values.tolist()},
        breakpoints=tuple(grid[1:-1].tolist()) if grid.size < 200 else (),
    )


def step_function(values, c_theta, alpha=1.0):
    """Piecewise constant curve on the equal blocks ``[k/m, (k+1)/m)``.

    Not an element of the smooth class; used for the block-constant checks.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    edges = np.arange(m + 1) / m

    def f(x):
        k = np.clip(np.searchsorted(edges, _arr(x), side="right") - 1, 0, m - 1)
        return values[k]

    def zero(x):
        return np.zeros_like(_arr(x))

    return ParameterFunction(f, zero, zero, c_theta=float(c_theta), alpha=alpha,
                             family_tag="step", params={"values": values.tolist()},
                             breakpoints=tuple(edges[1:-1].tolist()))


def oscillating_sine(C, n, c_theta=1.0, alpha=1.0):
    """``f_n(x) = C / (pi (n-1)) * sin(pi (n-1) x)``, vanishing at every design point."""
    C = float(C)
    w = math.pi * (int(n) - 1)
    amp = C / w

    def f(x):
        return amp * np.sin(w * _arr(x))

    def f1(x):
        return C * np.cos(w * _arr(x))

    def f2(x):
        return -C * w * np.sin(w * _arr(x))

    zeros = tuple((np.arange(1, int(n) - 1) / (int(n) - 1)).tolist())
    return ParameterFunction(f, f1, f2, c_theta=float(c_theta), alpha=alpha,
                             family_tag="oscillating-sine",
                             params={"C": C, "n": int(n)}, breakpoints=zeros)


def _bump_shape(k):
    # (1 - 4u^2)^4 * q(u) with q chosen so that the k-th derivative at 0 is positive
    base = np.polynomial.Polynomial([1.0, 0.0, -4.0]) ** 4
    q = {0: [1.0], 1: [1.0, 1.0], 2: [1.0, 0.0, 20.0]}.get(k)
    if q is None:
        raise ValidationError("built-in kernels support derivative order k <= 2")
    return base * np.polynomial.Polynomial(q)


def bump_kernel(k=0, s=2.0, target_norm=0.95):
    """Compactly supported kernel on ``[-1/2, 1/2]`` with ``K^{(k)}(0) > 0``.

    The kernel is rescaled so that its Hoelder-``s`` norm (see
    :func:`holder_norm`) equals ``target_norm`` on the validation grid.
    """
    shape = _bump_shape(k)
    raw = _poly_kernel(shape, 1.0)
    scale = target_norm / holder_norm(raw, s)
    fn = _poly_kernel(shape, scale)
    return ParameterFunction(fn.eval, fn.deriv1, fn.deriv2, c_theta=target_norm,
                             alpha=1.0, family_tag="bump-kernel",
                             params={"k": int(k), "s": float(s), "target_norm": target_norm})


def _poly_kernel(shape, scale):
    p = shape * scale
    d1, d2 = p.deriv(1), p.deriv(2)

    def cut(g):
        def h(u):
            u = _arr(u)
            return np.where(np.abs(u) <= 0.5, g(u), 0.0)
        return h

    return ParameterFunction(cut(p), cut(d1), cut(d2), c_theta=1.0, family_tag="custom",
                             breakpoints=(-0.5, 0.5))


def bump(kernel, L, s, h, x0, c_theta=None, alpha=1.0):
    """Scaled bump ``L h^s K((x - x0)/h)``."""
    L, s, h, x0 = float(L), float(s), float(h), float(x0)

    def f(x):
        return L * h**s * kernel.eval((_arr(x) - x0) / h)

    def f1(x):
        return L * h ** (s - 1) * kernel.deriv1((_arr(x) - x0) / h)

    def f2(x):
        return L * h ** (s - 2) * kernel.deriv2((_arr(x) - x0) / h)

    return ParameterFunction(f, f1, f2, c_theta=float(L if c_theta is None else c_theta),
                             alpha=alpha, family_tag="bump",
                             params={"L": L, "s": s, "h": h, "x0": x0,
                                     "kernel": dict(kernel.params)},
                             breakpoints=(x0 - h / 2, x0 + h / 2))


def zero_function(c_theta=1.0, alpha=1.0):
    """The curve ``theta = 0``."""
    return polynomial([0.0], c_theta, alpha)


def figure1_parameter(c_theta=None, alpha=1.0):
    """``0.3 x cos(10 x)`` with a class constant that it actually satisfies."""
    probe = scaled_sinusoid(0.3, 10.0, c_theta=1.0, alpha=alpha)
    if c_theta is None:
        c_theta = math.ceil(required_c_theta(probe) * 1.01)
    return scaled_sinusoid(0.3, 10.0, c_theta=c_theta, alpha=alpha)


_PARAMETER_FAMILIES = {
    "polynomial": lambda c_theta, alpha, coeffs: polynomial(coeffs, c_theta, alpha),
    "scaled-sinusoid": lambda c_theta, alpha, c, omega: scaled_sinusoid(c, omega, c_theta, alpha),
    "custom-grid": lambda c_theta, alpha, grid, values: custom_grid(grid, values, c_theta, alpha),
    "step": lambda c_theta, alpha, values: step_function(values, c_theta, alpha),
    "oscillating-sine": lambda c_theta, alpha, C, n: oscillating_sine(C, n, c_theta, alpha),
}


def make_parameter(family, **params):
    """Build a parameter function from a family name and its parameters."""
    if family == "figure1":
        return figure1_parameter(params.get("c_theta"), params.get("alpha", 1.0))
    try:
        builder = _PARAMETER_FAMILIES[family]
    except KeyError:
        raise ValidationError(f"unknown parameter family {family!r}") from None
    params = dict(params)
    c_theta = params.pop("c_theta", None)
    if c_theta is None:
        raise ValidationError("parameter section needs c_theta")
    alpha = params.pop("alpha", 1.0)
    try:
        return builder(float(c_theta), float(alpha), **params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for family {family!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Grid checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    passed: bool
    worst_value: float
    bound: float
    worst_x: float


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a grid-based invariant check."""

    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            flag = "pass" if c.passed else "FAIL"
            lines.append(f"{flag:4s}  {c.name:28s} worst={c.worst_value:.6g} "
                         f"bound={c.bound:.6g} at x={c.worst_x:.6g}")
        return "\n".join(lines)


def _check(name, values, xs, bound, rtol=REL_TOL):
    values = np.abs(np.asarray(values, dtype=float))
    i = int(np.argmax(values))
    worst = float(values[i])
    return InvariantCheck(name, worst <= bound * (1 + rtol) + 1e-300, worst, float(bound),
                          float(xs[i]))


def _holder_quotients(xs, g, alpha, pairs_subgrid=1001):
    """Largest ``|g(x)-g(y)| / |x-y|^alpha`` over adjacent and subgrid pairs."""
    best, where = 0.0, float(xs[0])
    dx = np.diff(xs)
    q = np.abs(np.diff(g)) / dx**alpha
    if q.size:
        i = int(np.argmax(q))
        best, where = float(q[i]), float(xs[i])
    step = max(1, xs.size // pairs_subgrid)
    xs_s, g_s = xs[::step], g[::step]
    for i in range(xs_s.size - 1):
        lag = xs_s[i + 1:] - xs_s[i]
        qq = np.abs(g_s[i + 1:] - g_s[i]) / lag**alpha
        j = int(np.argmax(qq))
        if qq[j] > best:
            best, where = float(qq[j]), float(xs_s[i])
    return best, where


def required_c_theta(theta, grid_size=DEFAULT_GRID):
    """Smallest constant for which ``theta`` passes the class bounds on a grid."""
    xs = np.linspace(0.0, 1.0, grid_size)
    d2 = theta.deriv2(xs)
    hold, _ = _holder_quotients(xs, d2, theta.alpha)
    return float(max(np.max(np.abs(theta.eval(xs))), np.max(np.abs(d2)), hold))


def validate_parameter(theta, grid_size=DEFAULT_GRID):
    """Check the class constraints of ``theta`` on an equidistant grid.

    Parameters
    ----------
    theta : ParameterFunction
    grid_size : int
        Number of grid points, at least 100.

    Returns
    -------
    ValidationReport
        One entry per invariant with the worst grid point.
    """
    if grid_size < 100:
        raise ValidationError("grid_size must be at least 100")
    C = theta.c_theta
    xs = np.linspace(0.0, 1.0, grid_size)
    f = theta.eval(xs)
    d1 = theta.deriv1(xs)
    d2 = theta.deriv2(xs)
    checks = [
        _check("sup|theta| <= C", f, xs, C),
        _check("sup|theta''| <= C", d2, xs, C),
    ]
    hold, hx = _holder_quotients(xs, d2, theta.alpha)
    checks.append(InvariantCheck("holder(theta'') <= C", hold <= C * (1 + REL_TOL), hold,
                                 float(C), hx))

    # finite-difference consistency; the bound is O(grid^2) with an estimated
    # higher-derivative constant plus a roundoff allowance
    dx = xs[1] - xs[0]
    eps = np.finfo(float).eps
    fd1 = (f[2:] - f[:-2]) / (2 * dx)
    fd2 = (f[2:] - 2 * f[1:-1] + f[:-2]) / dx**2
    m3 = float(np.max(np.abs(np.diff(d2)))) / dx if d2.size > 1 else 0.0
    m4 = float(np.max(np.abs(np.diff(d2, 2)))) / dx**2 if d2.size > 2 else 0.0
    fscale = float(np.max(np.abs(f))) + 1.0
    b1 = 2 * dx**2 * m3 / 6 + 4 * eps * fscale / dx + REL_TOL * (1 + float(np.max(np.abs(d1))))
    b2 = 2 * dx**2 * m4 / 12 + 16 * eps * fscale / dx**2 + REL_TOL * (1 + float(np.max(np.abs(d2))))
    checks.append(_check("deriv1 ~ central FD", fd1 - d1[1:-1], xs[1:-1], b1, rtol=0))
    checks.append(_check("deriv2 ~ central FD", fd2 - d2[1:-1], xs[1:-1], b2, rtol=0))
    return ValidationReport(tuple(checks))


def holder_norm(fn, s, grid_size=4001, support=(-0.5, 0.5)):
    """Hoelder-``s`` norm of a kernel on its support, for ``0 < s <= 3``.

    With ``r = ceil(s) - 1`` and ``beta = s - r`` the norm is
    ``max_{j<=r} sup|K^{(j)}| + [K^{(r)}]_beta``.
    """
    if not (0 < s <= 3):
        raise ValidationError("holder_norm supports 0 < s <= 3")
    r = math.ceil(s) - 1
    beta = s - r
    xs = np.linspace(support[0], support[1], grid_size)
    derivs = [fn.eval(xs), fn.deriv1(xs), fn.deriv2(xs)]
    sup = max(float(np.max(np.abs(d))) for d in derivs[: r + 1])
    top = derivs[r]
    semi, _ = _holder_quotients(xs, top, beta)
    return sup + semi


# ---------------------------------------------------------------------------
# Design
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """Deterministic quantile design on ``[0, 1]``.

    Attributes
    ----------
    quantile, density, cdf : callable
        ``F_D^{-1}``, ``f_D`` and ``F_D``.
    lipschitz_const, density_lower, density_upper : float
        Declared Lipschitz constant and bounds of ``f_D``.
    gap_constant : float
        A constant ``d`` with ``1/d <= n * gap <= d`` for every ``n >= 2``.
    """

    quantile: ArrayFn
    density: ArrayFn
    cdf: ArrayFn
    lipschitz_const: float
    density_lower: float
    density_upper: float
    gap_constant: float
    name: str = "custom"
    params: Mapping = field(default_factory=dict)

    def mass(self, a, b):
        """``int_a^b f_D``."""
        return self.cdf(_arr(b)) - self.cdf(_arr(a))

    def validate(self, grid_size=DEFAULT_GRID):
        us = np.linspace(0.0, 1.0, grid_size)
        q = self.quantile(us)
        if np.any(np.diff(q) < 0):
            raise ValidationError("design quantile is not monotone")
        if abs(q[0]) > 1e-9 or abs(q[-1] - 1) > 1e-9:
            raise ValidationError("design quantile must map [0,1] onto [0,1]")
        dens = self.density(np.linspace(0.0, 1.0, grid_size))
        if np.min(dens) < self.density_lower * (1 - REL_TOL) or np.min(dens) <= 0:
            raise ValidationError("design density drops below its declared lower bound")
        if np.max(np.abs(self.cdf(q) - us)) > 1e-8:
            raise ValidationError("design quantile and cdf do not round-trip")
        return True

    def to_dict(self):
        return {"family": self.name, **dict(self.params)}


def uniform_design():
    """Equidistant design ``x_j = (j-1)/(n-1)``."""
    ident = lambda u: _arr(u).copy()  # noqa: E731
    return DesignSpec(quantile=ident, density=lambda x: np.ones_like(_arr(x)),
                      cdf=lambda x: np.clip(_arr(x), 0.0, 1.0), lipschitz_const=0.0,
                      density_lower=1.0, density_upper=1.0, gap_constant=2.0,
                      name="uniform")


def linear_design(b=1.0):
    """Design with density ``(1 + b x) / (1 + b/2)`` for ``b > -1``."""
    b = float(b)
    if b <= -1:
        raise ValidationError("linear design needs b > -1")
    if b == 0:
        return uniform_design()
    z = 1.0 + b / 2.0

    def quantile(u):
        u = np.clip(_arr(u), 0.0, 1.0)
        x = 2.0 * z * u / (1.0 + np.sqrt(1.0 + 2.0 * b * z * u))
        return np.clip(x, 0.0, 1.0)

    def density(x):
        return (1.0 + b * _arr(x)) / z

    def cdf(x):
        x = np.clip(_arr(x), 0.0, 1.0)
        return (x + 0.5 * b * x * x) / z

    lo, hi = min(1.0, 1.0 + b) / z, max(1.0, 1.0 + b) / z
    return DesignSpec(quantile, density, cdf, lipschitz_const=abs(b) / z,
                      density_lower=lo, density_upper=hi,
                      gap_constant=max(hi, 2.0 / lo), name="linear", params={"b": b})


def make_design(family="uniform", **params):
    if family == "uniform":
        return uniform_design()
    if family == "linear":
        return linear_design(**params)
    raise ValidationError(f"unknown design family {family!r}")


def design_points(n, design):
    """Quantile design ``x_j = F_D^{-1}((j-1)/(n-1))`` for ``j = 1..n``.

    Examples
    --------
    >>> design_points(5, uniform_design()).tolist()
    [0.0, 0.25, 0.5, 0.75, 1.0]
    """
    if int(n) != n or n < 2:
        raise ValidationError("design_points needs an integer n >= 2")
    n = int(n)
    x = np.asarray(design.quantile(np.arange(n) / (n - 1)), dtype=float)
    if np.any(np.diff(x) < 0):
        raise ValidationError("design quantile is not monotone")
    if abs(x[0]) > 1e-9 or abs(x[-1] - 1.0) > 1e-9:
        raise ValidationError("design quantile must map 0 to 0 and 1 to 1")
    x[0], x[-1] = 0.0, 1.0
    return x


# ---------------------------------------------------------------------------
# Error densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ErrorDensity:
    """Density on ``[-1, 1]`` with jumps at the endpoints.

    Attributes
    ----------
    phi : callable
        The density on ``[-1, 1]`` (zero outside).
    jump_left, jump_right : float
        ``phi(-1)`` and ``phi(1)``.
    lipschitz_const : float
        Bound on both ``sup phi`` and the Lipschitz constant of ``phi``.
    one_sided : bool
        True when ``phi(1) = 0``.
    cdf : callable, optional
        Exact distribution function; tabulated by quadrature when omitted.
    """

    phi: ArrayFn
    jump_left: float
    jump_right: float
    lipschitz_const: float
    one_sided: bool = False
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    cdf: ArrayFn | None = None

    def __post_init__(self):
        if self.jump_left <= 0:
            raise ValidationError("phi(-1) must be positive")
        if self.one_sided:
            if self.jump_right != 0:
                raise ValidationError("one-sided error densities need phi(1) = 0")
        elif self.jump_right <= 0:
            raise ValidationError("phi(1) must be positive unless one_sided")

    @property
    def J(self):
        """Total jump size ``phi(-1) + phi(1)``."""
        return self.jump_left + self.jump_right

    def density(self, t):
        t = _arr(t)
        return np.where(np.abs(t) <= 1.0, self.phi(np.clip(t, -1.0, 1.0)), 0.0)

    @cached_property
    def table(self):
        """``(cdf_values, t_grid)`` for inverse-CDF sampling."""
        t = np.linspace(-1.0, 1.0, ERROR_TABLE_SIZE + 1)
        if self.cdf is not None:
            F = np.asarray(self.cdf(t), dtype=float)
        else:
            # 5-point Gauss-Legendre on every cell is exact for quartic phi
            z, w = np.polynomial.legendre.leggauss(5)
            a, b = t[:-1], t[1:]
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            nodes = mid[:, None] + half[:, None] * z[None, :]
            cell = (self.phi(nodes) * w[None, :]).sum(axis=1) * half
            F = np.concatenate([[0.0], np.cumsum(cell)])
        F = F / F[-1]
        F[0], F[-1] = 0.0, 1.0
        return F, t

    def cdf_value(self, t):
        if self.cdf is not None:
            return np.clip(self.cdf(np.clip(_arr(t), -1.0, 1.0)), 0.0, 1.0)
        F, grid = self.table
        return np.interp(_arr(t), grid, F)

    def ppf(self, u):
        """Inverse CDF by monotone linear interpolation of the table."""
        F, t = self.table
        return np.interp(_arr(u), F, t)

    def moment(self, k=1):
        z, w = np.polynomial.legendre.leggauss(64)
        return float(np.sum(w * z**k * self.phi(z)))

    def validate(self, grid_size=DEFAULT_GRID):
        z, w = np.polynomial.legendre.leggauss(64)
        total = float(np.sum(w * self.phi(z)))
        if abs(total - 1.0) > 1e-8:
            raise ValidationError(f"error density integrates to {total}, not 1")
        t = np.linspace(-1.0, 1.0, grid_size)
        v = self.phi(t)
        if np.any(v[1:-1] <= 0):
            raise ValidationError("error density must be positive inside (-1, 1)")
        lip = float(np.max(np.abs(np.diff(v)) / np.diff(t)))
        C = self.lipschitz_const * (1 + REL_TOL)
        if np.max(np.abs(v)) > C or lip > C:
            raise ValidationError("error density violates its declared constant C_eps")
        if abs(v[0] - self.jump_left) > 1e-12 or abs(v[-1] - self.jump_right) > 1e-12:
            raise ValidationError("declared jumps do not match phi(+-1)")
        return True

    def to_dict(self):
        return {"family": self.name, **dict(self.params)}


def uniform_error():
    """Uniform density 1/2 on [-1, 1]."""
    return linear_error(0.0)


def linear_error(beta=0.0):
    """``phi(t) = (1 + beta t)/2``; ``beta = -1`` gives the one-sided case."""
    beta = float(beta)
    if not -1.0 <= beta < 1.0:
        raise ValidationError("linear error density needs -1 <= beta < 1")

    def phi(t):
        return 0.5 * (1.0 + beta * _arr(t))

    def cdf(t):
        t = _arr(t)
        return 0.5 * (t + 1.0) + 0.25 * beta * (t * t - 1.0)

    name = "uniform" if beta == 0 else ("one-sided" if beta == -1.0 else "linear")
    params = {} if beta == 0 or beta == -1.0 else {"beta": beta}
    return ErrorDensity(phi, jump_left=0.5 * (1 - beta), jump_right=0.5 * (1 + beta),
                        lipschitz_const=0.5 * (1 + abs(beta)), one_sided=(beta == -1.0),
                        name=name, params=params, cdf=cdf)


def one_sided_error():
    """``phi(t) = (1 - t)/2``: jump only at the left endpoint."""
    return linear_error(-1.0)


def quadratic_jump_error():
    """``phi(t) = (1 + 3t^2)/4`` with unit jumps at both endpoints."""

    def phi(t):
        t = _arr(t)
        return 0.25 * (1.0 + 3.0 * t * t)

    def cdf(t):
        t = _arr(t)
        return 0.25 * (t + t**3 + 2.0)

    return ErrorDensity(phi, 1.0, 1.0, lipschitz_const=1.5, name="quadratic-jump", cdf=cdf)


def make_error(family="uniform", **params):
    if family == "uniform":
        return uniform_error()
    if family == "linear":
        return linear_error(**params)
    if family == "one-sided":
        return one_sided_error()
    if family == "quadratic-jump":
        return quadratic_jump_error()
    raise ValidationError(f"unknown error family {family!r}")


# ---------------------------------------------------------------------------
# Experiment specification and Hoelder band
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """Design, error law, sample size and class constants."""

    n: int
    design: DesignSpec
    error: ErrorDensity
    c_theta: float
    alpha: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValidationError("n must be a nonnegative integer")
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.c_theta <= 0:
            raise ValidationError("c_theta must be positive")

    @property
    def y_bounds(self):
        """Vertical extent ``[-C - 1, C + 1]`` of the domain S."""
        return (-self.c_theta - 1.0, self.c_theta + 1.0)

    def with_n(self, n):
        return ExperimentSpec(int(n), self.design, self.error, self.c_theta, self.alpha)

    def to_dict(self):
        return {
            "experiment": {"n": int(self.n), "c_theta": float(self.c_theta),
                           "alpha": float(self.alpha)},
            "design": self.design.to_dict(),
            "error": self.error.to_dict(),
        }

    @cached_property
    def hash(self):
        """Short content hash identifying the specification."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d):
        exp = d.get("experiment", {})
        design = make_design(**d.get("design", {"family": "uniform"}))
        error = make_error(**d.get("error", {"family": "uniform"}))
        try:
            return cls(int(exp.get("n", 100)), design, error,
                       float(exp.get("c_theta", 1.0)), float(exp.get("alpha", 1.0)))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(str(exc)) from None


def check_consistent(theta, spec):
    """Raise unless ``theta`` and ``spec`` declare the same class constants."""
    if theta.c_theta != spec.c_theta:
        raise ValidationError(
            f"parameter declares C_Theta={theta.c_theta} but spec has {spec.c_theta}")


def holder_band(h, c_theta):
    """Explicit constant ``gamma_h = 2 C_Theta`` of the admissibility band.

    Parameters
    ----------
    h : float
        Bandwidth in ``(0, 1/2]``.
    c_theta : float
        Class constant.

    Returns
    -------
    float
    """
    if not (0.0 < h <= 0.5):
        raise ValidationError("holder_band needs 0 < h <= 1/2")
    if c_theta < 0:
        raise ValidationError("c_theta must be nonnegative")
    return 2.0 * float(c_theta)
