"""Samplers for the regression experiment and the boundary Poisson processes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy import integrate

from . import io
from .errors import NumericalError, ValidationError
from .model import (ExperimentSpec, ParameterFunction, check_consistent, design_points,
                    validate_parameter)
from .rng import derive_seed, make_rng

TAGS = ("X1_lower_region", "X2_upper_region", "X_l", "X_u", "other")
LOWER_TAGS = ("X1_lower_region", "X_l")
UPPER_TAGS = ("X2_upper_region", "X_u")


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegressionSample:
    """Observations ``(x_j, Y_j)`` of the regression experiment.

    ``index`` holds the 1-based observation numbers, so halves produced by
    sample splitting remember their position in the full sample.
    """

    xs: np.ndarray
    ys: np.ndarray
    n: int
    seed: int
    spec_ref: str
    index: np.ndarray | None = None

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", np.arange(1, len(self.xs) + 1))
        if not (len(self.xs) == len(self.ys) == len(self.index)):
            raise ValidationError("xs, ys and index differ in length")

    def __len__(self):
        return len(self.xs)

    def to_csv(self, path):
        header = {"kind": "regression", "n": self.n, "seed": self.seed, "spec": self.spec_ref}
        rows = zip(self.index.tolist(), self.xs.tolist(), self.ys.tolist())
        return io.write_csv(path, header, ["j", "x", "y"], rows)

    @classmethod
    def from_csv(cls, path):
        header, columns, rows = io.read_csv(path)
        if columns[:3] != ["j", "x", "y"]:
            raise ValidationError(f"{path}: not a regression sample")
        arr = np.array(rows, dtype=object)
        if arr.size == 0:
            arr = np.zeros((0, 3))
        return cls(xs=arr[:, 1].astype(float), ys=arr[:, 2].astype(float),
                   n=int(header.get("n", len(rows))), seed=int(header.get("seed", 0)),
                   spec_ref=header.get("spec", ""), index=arr[:, 0].astype(np.int64))


@dataclass(frozen=True, eq=False)
class PointProcessRealization:
    """A finite point configuration on ``S = [0,1] x [y_lo, y_hi]``.

    Attributes
    ----------
    points : ndarray, shape (N, 2)
    process_tag : str
        One of :data:`TAGS`.
    intensity_mass : float
        Total mass of the generating intensity.
    seed : int
    scale : float
        The ``n`` multiplying ``f_D(x) * phi(+-1)`` in the intensity.
    domain : tuple of float
        Vertical extent ``(y_lo, y_hi)`` of S.
    marks : mapping of str to ndarray
        Optional per-point columns (e.g. ``pass`` and ``extreme``).
    """

    points: np.ndarray
    process_tag: str
    intensity_mass: float
    seed: int
    scale: float
    domain: tuple
    spec_ref: str = ""
    marks: Mapping = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if self.process_tag not in TAGS:
            raise ValidationError(f"unknown process tag {self.process_tag!r}")
        for k, v in self.marks.items():
            if len(v) != len(pts):
                raise ValidationError(f"mark {k!r} has wrong length")

    def __len__(self):
        return self.points.shape[0]

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def is_lower(self):
        return self.process_tag in LOWER_TAGS

    def in_domain(self, tol=0.0):
        lo, hi = self.domain
        x, y = self.x, self.y
        return bool(np.all((x >= 0) & (x <= 1) & (y >= lo - tol) & (y <= hi + tol)))

    def to_csv(self, path):
        header = {"kind": "ppp", "tag": self.process_tag, "n": io.fmt(self.scale),
                  "seed": self.seed, "spec": self.spec_ref,
                  "intensity_mass": io.fmt(self.intensity_mass),
                  "y_lo": io.fmt(self.domain[0]), "y_hi": io.fmt(self.domain[1])}
        names = sorted(self.marks)
        cols = ["tag", "x", "y"] + names
        tag = self.process_tag
        rows = ([tag, float(p[0]), float(p[1])] + [_mark(self.marks[k][i]) for k in names]
                for i, p in enumerate(self.points))
        return io.write_csv(path, header, cols, rows)

    @classmethod
    def from_csv(cls, path):
        header, columns, rows = io.read_csv(path)
        if columns[:3] != ["tag", "x", "y"]:
            raise ValidationError(f"{path}: not a point-process file")
        pts = np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)
        marks = {name: np.array([int(r[3 + i]) for r in rows], dtype=np.int64)
                 for i, name in enumerate(columns[3:])}
        return cls(pts, header["tag"], float(header["intensity_mass"]),
                   int(header.get("seed", 0)), float(header["n"]),
                   (float(header["y_lo"]), float(header["y_hi"])),
                   spec_ref=header.get("spec", ""), marks=marks)


def _mark(v):
    return int(v)


def empty_realization(tag, domain, scale=0.0, seed=0, spec_ref=""):
    return PointProcessRealization(np.zeros((0, 2)), tag, 0.0, seed, scale, tuple(domain),
                                   spec_ref=spec_ref)


# ---------------------------------------------------------------------------
# Horizontal densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockConstantDensity:
    """Density ``m * int_{I_k} f_D`` on each block ``I_k = [k/m, (k+1)/m)``."""

    design: object
    m: int

    @cached_property
    def _weights(self):
        edges = np.arange(self.m + 1) / self.m
        return edges, np.asarray(self.design.cdf(edges), dtype=float)

    def density(self, x):
        edges, F = self._weights
        k = np.clip(np.searchsorted(edges, np.asarray(x, float), side="right") - 1, 0, self.m - 1)
        return self.m * (F[k + 1] - F[k])

    def cdf(self, x):
        edges, F = self._weights
        return np.interp(np.asarray(x, float), edges, F)

    def quantile(self, u):
        edges, F = self._weights
        return np.interp(np.asarray(u, float), F, edges)

    @property
    def breakpoints(self):
        return tuple((np.arange(1, self.m) / self.m).tolist())


# ---------------------------------------------------------------------------
# Vertical regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BelowCurve:
    theta: ParameterFunction
    kind: str = "below-curve"

    def lo(self, x):
        return np.full_like(x, -np.inf)

    def hi(self, x):
        return self.theta.eval(x)

    @property
    def breakpoints(self):
        return self.theta.breakpoints


@dataclass(frozen=True, eq=False)
class AboveCurve:
    theta: ParameterFunction
    kind: str = "above-curve"

    def lo(self, x):
        return self.theta.eval(x)

    def hi(self, x):
        return np.full_like(x, np.inf)

    @property
    def breakpoints(self):
        return self.theta.breakpoints


@dataclass(frozen=True)
class BelowLine:
    """``y <= level + slope * (x - center)``."""

    level: float
    slope: float
    center: float
    kind: str = "below-tilted-line"
    breakpoints: tuple = ()

    def lo(self, x):
        return np.full_like(x, -np.inf)

    def hi(self, x):
        return self.level + self.slope * (x - self.center)


@dataclass(frozen=True)
class AboveLine:
    """``y >= level + slope * (x - center)``."""

    level: float
    slope: float
    center: float
    kind: str = "above-tilted-line"
    breakpoints: tuple = ()

    def lo(self, x):
        return self.level + self.slope * (x - self.center)

    def hi(self, x):
        return np.full_like(x, np.inf)


@dataclass(frozen=True)
class Band:
    y_lo: float
    y_hi: float
    kind: str = "band"
    breakpoints: tuple = ()

    def lo(self, x):
        return np.full_like(x, self.y_lo)

    def hi(self, x):
        return np.full_like(x, self.y_hi)


@dataclass(frozen=True, eq=False)
class IntensityFunction:
    """Indicator-region intensity ``scale * f(x) * 1{y in R(x)}``.

    Parameters
    ----------
    design_density : object
        Provides ``density``, ``cdf`` and ``quantile`` (a :class:`DesignSpec`
        or :class:`BlockConstantDensity`).
    vertical_region : region object
        One of :class:`BelowCurve`, :class:`AboveCurve`, :class:`BelowLine`,
        :class:`AboveLine`, :class:`Band`.
    scale : float
        Nonnegative multiplier, e.g. ``n * phi(1)``.
    domain : tuple of float
        Vertical extent of S; the region is intersected with it.
    block_restriction : tuple of float, optional
        Restrict ``x`` to ``[a, b]``.
    """

    design_density: object
    vertical_region: object
    scale: float
    domain: tuple = (-np.inf, np.inf)
    block_restriction: tuple | None = None

    def __post_init__(self):
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ValidationError("intensity scale must be finite and nonnegative")

    @property
    def x_range(self):
        return self.block_restriction if self.block_restriction is not None else (0.0, 1.0)

    def vertical(self, x):
        """Clipped vertical interval ``(lo, hi)`` at each ``x``; empty where ``hi < lo``."""
        x = np.asarray(x, dtype=float)
        lo = np.maximum(self.vertical_region.lo(x), self.domain[0])
        hi = np.minimum(self.vertical_region.hi(x), self.domain[1])
        return lo, hi

    def height(self, x):
        lo, hi = self.vertical(x)
        return np.maximum(hi - lo, 0.0)

    def __call__(self, x, y):
        """Pointwise intensity value."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lo, hi = self.vertical(x)
        a, b = self.x_range
        inside = (y >= lo) & (y <= hi) & (x >= a) & (x <= b)
        return np.where(inside, self.scale * self.design_density.density(x), 0.0)

    def breakpoints(self):
        a, b = self.x_range
        pts = set(getattr(self.vertical_region, "breakpoints", ()))
        pts.update(getattr(self.design_density, "breakpoints", ()))
        return sorted(p for p in pts if a < p < b)

    @cached_property
    def mass(self):
        """``int lambda`` by adaptive quadrature over ``x``."""
        if self.scale == 0:
            return 0.0
        a, b = self.x_range
        if not (math.isfinite(self.domain[0]) and math.isfinite(self.domain[1])):
            probe = self.height(np.linspace(a, b, 17))
            if not np.all(np.isfinite(probe)):
                raise ValidationError("unbounded region: supply a finite domain")
        val, err = integrate_1d(lambda x: self.design_density.density(x) * self.height(x),
                                a, b, self.breakpoints())
        return self.scale * max(val, 0.0)

    def bbox(self):
        """Bounding box ``(a, b, y_lo, y_hi)`` used by the rejection sampler."""
        a, b = self.x_range
        reg = self.vertical_region
        y_lo, y_hi = self.domain
        if isinstance(reg, Band):
            y_lo, y_hi = max(y_lo, reg.y_lo), min(y_hi, reg.y_hi)
        elif isinstance(reg, (BelowLine, AboveLine)):
            ends = reg.level + reg.slope * (np.array([a, b]) - reg.center)
            if isinstance(reg, BelowLine):
                y_hi = min(y_hi, float(ends.max()))
            else:
                y_lo = max(y_lo, float(ends.min()))
        if not (math.isfinite(y_lo) and math.isfinite(y_hi)):
            raise ValidationError("unbounded region: supply a finite domain")
        return a, b, y_lo, y_hi


def integrate_1d(f, a, b, points=(), epsabs=1e-13, epsrel=1e-12):
    """Adaptive Gauss-Kronrod quadrature with optional breakpoints.

    Returns ``(value, error_estimate)``; raises :class:`NumericalError` if
    the requested accuracy is not reached.
    """
    if b <= a:
        return 0.0, 0.0
    pts = [p for p in points if a < p < b]
    g = lambda t: float(np.asarray(f(np.array([t])))[0])  # noqa: E731
    total, err_total = 0.0, 0.0
    # integrate panel by panel so that thousands of breakpoints stay cheap
    edges = [a] + pts + [b]
    for lo, hi in zip(edges[:-1], edges[1:]):
        if len(edges) > 60:
            val, err = _fixed_gl(f, lo, hi)
        else:
            val, err, *_ = integrate.quad(g, lo, hi, epsabs=epsabs, epsrel=epsrel,
                                          limit=200, full_output=1)
        total += val
        err_total += err
    tol = max(1e-9, 1e-9 * abs(total))
    if not math.isfinite(total) or err_total > tol:
        raise NumericalError(f"quadrature did not converge (error estimate {err_total:.3g})",
                             residual=err_total)
    return total, err_total


_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(12)


def _fixed_gl(f, a, b):
    """Gauss-Legendre of orders 20 and 12 on one smooth panel."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    z, w = _GL_HI
    hi = half * float(np.sum(w * f(mid + half * z)))
    z, w = _GL_LO
    lo = half * float(np.sum(w * f(mid + half * z)))
    return hi, abs(hi - lo)


# ---------------------------------------------------------------------------
# Error and regression sampling
# ---------------------------------------------------------------------------


def sample_errors(err, rng, size):
    """``size`` i.i.d. draws from the error density by tabulated inverse CDF."""
    return err.ppf(rng.random(size))


def sample_error(err, rng_stream):
    """A single draw from the error density."""
    return float(sample_errors(err, rng_stream, None))


def sample_regression(theta, spec: ExperimentSpec, seed, validate=True):
    """Draw ``Y_j = theta(x_j) + eps_j`` on the quantile design.

    Parameters
    ----------
    theta : ParameterFunction
    spec : ExperimentSpec
    seed : int
    validate : bool
        Check ``theta`` against its class constants first (disable only for
        block-constant test curves or inside Monte Carlo loops after a single
        upfront check).
    """
    check_consistent(theta, spec)
    if validate:
        report = validate_parameter(theta)
        if not report.passed:
            raise ValidationError("parameter fails class validation:\n" + str(report))
    xs = design_points(spec.n, spec.design)
    rng = make_rng(seed)
    eps = sample_errors(spec.error, rng, spec.n)
    ys = theta.eval(xs) + eps
    return RegressionSample(xs=xs, ys=ys, n=spec.n, seed=int(seed), spec_ref=spec.hash)


# ---------------------------------------------------------------------------
# Poisson point processes
# ---------------------------------------------------------------------------


def _restricted_x(density, a, b, u):
    Fa, Fb = density.cdf(np.array([a, b], dtype=float))
    x = density.quantile(Fa + u * (Fb - Fa))
    return np.clip(x, a, b)


def _rejection(rng, lam: IntensityFunction, count):
    if count == 0:
        return np.zeros((0, 2))
    a, b, y_lo, y_hi = lam.bbox()
    dens = lam.design_density
    Fa, Fb = dens.cdf(np.array([a, b], dtype=float))
    box = lam.scale * (Fb - Fa) * (y_hi - y_lo)
    rate = min(1.0, lam.mass / box) if box > 0 else 1.0
    if rate <= 0:
        raise NumericalError("rejection sampler has zero acceptance")
    out, got = [], 0
    while got < count:
        k = int(math.ceil((count - got) / rate * 1.1)) + 16
        x = _restricted_x(dens, a, b, rng.random(k))
        y = y_lo + (y_hi - y_lo) * rng.random(k)
        lo, hi = lam.vertical(x)
        ok = (y >= lo) & (y <= hi)
        pts = np.column_stack([x[ok], y[ok]])
        out.append(pts)
        got += pts.shape[0]
    return np.concatenate(out)[:count]


def sample_ppp(lam: IntensityFunction, seed, tag="other", spec_ref=""):
    """Poisson process with intensity ``lam``: Poisson count, then i.i.d. points.

    Points are drawn from ``lam / mass`` by rejection from the bounding box
    of the region. A zero-mass intensity gives an empty realisation.
    """
    rng = make_rng(seed)
    mass = lam.mass
    count = int(rng.poisson(mass)) if mass > 0 else 0
    pts = _rejection(rng, lam, count)
    return PointProcessRealization(pts, tag, float(mass), int(seed), float(lam.scale),
                                   tuple(lam.domain), spec_ref=spec_ref)


def boundary_intensities(theta, spec: ExperimentSpec, scale=None, block=None):
    """The pair of boundary intensities on S.

    ``lambda_1 = scale * phi(1) * f_D(x) * 1{y <= theta(x)}`` and
    ``lambda_2 = scale * phi(-1) * f_D(x) * 1{y >= theta(x)}``, with
    ``scale = n`` unless given.
    """
    scale = float(spec.n if scale is None else scale)
    dom = spec.y_bounds
    lam1 = IntensityFunction(spec.design, BelowCurve(theta), scale * spec.error.jump_right,
                             dom, block)
    lam2 = IntensityFunction(spec.design, AboveCurve(theta), scale * spec.error.jump_left,
                             dom, block)
    return lam1, lam2


def _with_scale(real, scale):
    return replace(real, scale=float(scale))


def sample_boundary_pair(theta, spec: ExperimentSpec, seed, scale=None, block=None):
    """Draw ``(X_1, X_2)`` of the boundary experiment by rejection."""
    scale = float(spec.n if scale is None else scale)
    lam1, lam2 = boundary_intensities(theta, spec, scale, block)
    x1 = sample_ppp(lam1, derive_seed(seed, "X1"), "X1_lower_region", spec.hash)
    x2 = sample_ppp(lam2, derive_seed(seed, "X2"), "X2_upper_region", spec.hash)
    return _with_scale(x1, scale), _with_scale(x2, scale)


def sample_ppp_sequential(theta, spec: ExperimentSpec, side, seed, scale=None):
    """Boundary process built from cumulative exponential spacings.

    Points are ``(x_k, theta(x_k) -/+ Gamma_k / rate)`` with ``x_k`` i.i.d.
    from ``f_D``, ``Gamma_k`` the partial sums of standard exponentials and
    ``rate = scale * phi(+-1)``. Points leaving S are discarded.
    """
    if side not in ("lower", "upper"):
        raise ValidationError("side must be 'lower' or 'upper'")
    scale = float(spec.n if scale is None else scale)
    jump = spec.error.jump_right if side == "lower" else spec.error.jump_left
    rate = scale * jump
    tag = "X1_lower_region" if side == "lower" else "X2_upper_region"
    lam1, lam2 = boundary_intensities(theta, spec, scale)
    lam = lam1 if side == "lower" else lam2
    dom = spec.y_bounds
    if rate <= 0:
        return empty_realization(tag, dom, scale, int(seed), spec.hash)
    rng = make_rng(seed)
    depth_max = 2.0 * spec.c_theta + 1.0
    chunks, last = [], 0.0
    while last <= depth_max * rate:
        k = max(64, int(1.2 * (depth_max * rate - last)) + 64)
        g = last + np.cumsum(rng.exponential(1.0, k))
        chunks.append(g)
        last = float(g[-1])
    gam = np.concatenate(chunks)
    gam = gam[gam <= depth_max * rate]
    xs = spec.design.quantile(rng.random(gam.size))
    th = theta.eval(xs)
    ys = th - gam / rate if side == "lower" else th + gam / rate
    keep = (ys >= dom[0]) & (ys <= dom[1])
    pts = np.column_stack([xs[keep], ys[keep]])
    return PointProcessRealization(pts, tag, float(lam.mass), int(seed), scale, dom,
                                   spec_ref=spec.hash)


# ---------------------------------------------------------------------------
# Block-wise tilted-line clouds used by the equivalence pipeline
# ---------------------------------------------------------------------------


def _positive_part_integral(ga, gb, c, width):
    """``int max(g - c, 0)`` for ``g`` linear from ``ga`` to ``gb`` over ``width``."""
    ga, gb, c, width = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (ga, gb, c, width)))
    hi = np.maximum(ga, gb)
    lo = np.minimum(ga, gb)
    both = width * (0.5 * (ga + gb) - c)
    span = np.where(hi > lo, hi - lo, 1.0)
    tri = width * (hi - c) ** 2 / (2.0 * span)
    return np.where(lo >= c, both, np.where(hi <= c, 0.0, tri))


def line_region_area(a, b, level, slope, center, y_lo, y_hi, below=True):
    """Exact area between a line and a clipping band over ``[a, b]``.

    ``below=True`` measures ``{y_lo <= y <= min(line, y_hi)}``, otherwise
    ``{max(line, y_lo) <= y <= y_hi}``.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    ga = level + slope * (a - center)
    gb = level + slope * (b - center)
    w = b - a
    clipped = _positive_part_integral(ga, gb, y_lo, w) - _positive_part_integral(ga, gb, y_hi, w)
    if below:
        return clipped
    return (y_hi - y_lo) * w - clipped


def sample_line_blocks(rng, counts, a, b, level, slope, center, y_lo, y_hi, below=True):
    """Uniform points under (or over) a tilted line, independently per block.

    Parameters
    ----------
    rng : numpy.random.Generator
    counts : ndarray of int
        Number of points wanted in each block.
    a, b, level, slope, center : ndarray
        Block edges and the line ``level + slope * (x - center)``.
    y_lo, y_hi : float
        Vertical clipping band.
    below : bool
        Region side.

    Returns
    -------
    points : ndarray, shape (sum(counts), 2)
    block : ndarray of int
        Block of every point, sorted by block.
    """
    counts = np.asarray(counts, dtype=np.int64)
    m = counts.size
    ga = level + slope * (a - center)
    gb = level + slope * (b - center)
    if below:
        box_lo = np.full(m, float(y_lo))
        box_hi = np.clip(np.maximum(ga, gb), y_lo, y_hi)
    else:
        box_lo = np.clip(np.minimum(ga, gb), y_lo, y_hi)
        box_hi = np.full(m, float(y_hi))
    area = line_region_area(a, b, level, slope, center, y_lo, y_hi, below)
    box_area = (b - a) * (box_hi - box_lo)
    acc = np.where(box_area > 0, area / np.where(box_area > 0, box_area, 1.0), 1.0)
    acc = np.clip(acc, 1e-3, 1.0)
    need = counts.copy()
    xs, ys, ks = [], [], []
    while need.sum() > 0:
        draws = np.where(need > 0, np.ceil(need / acc * 1.1).astype(np.int64) + 4, 0)
        ids = np.repeat(np.arange(m), draws)
        x = a[ids] + (b[ids] - a[ids]) * rng.random(ids.size)
        y = box_lo[ids] + (box_hi[ids] - box_lo[ids]) * rng.random(ids.size)
        line = level[ids] + slope[ids] * (x - center[ids])
        ok = (y <= line) if below else (y >= line)
        ids_ok, x_ok, y_ok = ids[ok], x[ok], y[ok]
        first = np.searchsorted(ids_ok, ids_ok, side="left")
        rank = np.arange(ids_ok.size) - first
        keep = rank < need[ids_ok]
        xs.append(x_ok[keep])
        ys.append(y_ok[keep])
        ks.append(ids_ok[keep])
        need -= np.bincount(ids_ok[keep], minlength=m)
    k = np.concatenate(ks) if ks else np.zeros(0, dtype=np.int64)
    order = np.argsort(k, kind="stable")
    pts = np.column_stack([np.concatenate(xs), np.concatenate(ys)]) if xs else np.zeros((0, 2))
    return pts[order], k[order]
