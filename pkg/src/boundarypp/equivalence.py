"""Constructive map from a regression sample to a pair of boundary processes.

The forward transform splits the sample by index parity, bins one half,
localises it with a pilot fitted on the other half, keeps only per-block
extremes and rebuilds Poisson clouds under (or over) tilted lines through
those extremes. A second pass swaps the roles of the halves, with the pilot
now fitted on the processes produced by the first pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ValidationError
from .estimators import PilotEstimate, pilot_estimate
from .model import ExperimentSpec
from .rng import derive_seed, make_rng
from .samplers import (PointProcessRealization, RegressionSample, empty_realization,
                       line_region_area, sample_line_blocks)


def default_block_count(n, alpha=1.0):
    """``m = ceil(n^(2/3 - min(alpha/2, 1/8)))``."""
    if n < 1:
        raise ValidationError("block count needs n >= 1")
    return int(math.ceil(n ** (2.0 / 3.0 - min(alpha / 2.0, 0.125)) - 1e-9))


def block_index(xs, m):
    """Block ``k`` with ``x`` in ``[k/m, (k+1)/m)``; the last block is closed."""
    edges = np.arange(m + 1) / m
    return np.clip(np.searchsorted(edges, np.asarray(xs, float), side="right") - 1, 0, m - 1)


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Equal-width blocks over the design points of one half.

    Attributes
    ----------
    m : int
    xs : ndarray
        Design points being binned.
    index_map : ndarray of int
        Block of each design point.
    block_counts : ndarray of int
        ``l_k``.
    first_index : ndarray of int
        Smallest observation number in each block (``-1`` if empty).
    """

    m: int
    xs: np.ndarray
    index_map: np.ndarray
    block_counts: np.ndarray
    first_index: np.ndarray

    @classmethod
    def build(cls, xs, m, obs_index=None):
        if int(m) != m or m < 1:
            raise ValidationError("m must be a positive integer")
        m = int(m)
        xs = np.asarray(xs, dtype=float)
        obs = np.arange(1, xs.size + 1) if obs_index is None else np.asarray(obs_index)
        idx = block_index(xs, m)
        counts = np.bincount(idx, minlength=m).astype(np.int64)
        first = np.full(m, -1, dtype=np.int64)
        order = np.argsort(obs, kind="stable")[::-1]
        first[idx[order]] = obs[order]
        return cls(m, xs, idx, counts, first)

    @property
    def edges(self):
        return np.arange(self.m + 1) / self.m

    @property
    def centers(self):
        return (np.arange(self.m) + 0.5) / self.m

    @property
    def intervals(self):
        e = self.edges
        return list(zip(e[:-1].tolist(), e[1:].tolist()))


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def split_sample(sample: RegressionSample):
    """Odd-numbered observations and even-numbered observations.

    Raises
    ------
    ValidationError
        If the sample size is odd.
    """
    n = len(sample)
    if n % 2:
        raise ValidationError("sample splitting needs an even sample size")
    a, b = slice(0, n, 2), slice(1, n, 2)
    mk = lambda s: RegressionSample(sample.xs[s].copy(), sample.ys[s].copy(), sample.n,  # noqa: E731
                                    sample.seed, sample.spec_ref, sample.index[s].copy())
    return mk(a), mk(b)


def merge(half_a: RegressionSample, half_b: RegressionSample):
    """Inverse of :func:`split_sample`."""
    idx = np.concatenate([half_a.index, half_b.index])
    order = np.argsort(idx, kind="stable")
    return RegressionSample(np.concatenate([half_a.xs, half_b.xs])[order],
                            np.concatenate([half_a.ys, half_b.ys])[order],
                            half_a.n, half_a.seed, half_a.spec_ref, idx[order])


# ---------------------------------------------------------------------------
# Exactly invertible shifts
# ---------------------------------------------------------------------------


def exact_shift(values, offset):
    """``values - offset`` rounded, plus the exact rounding error.

    ``values == fsum(shifted, carry, offset)`` holds bitwise.
    """
    a = np.asarray(values, dtype=float)
    b = -np.asarray(offset, dtype=float)
    s = a + b
    bb = s - a
    carry = (a - (s - bb)) + (b - bb)
    # the carry of a zero input is zero; its sign records a negative zero
    carry = np.where((a == 0) & np.signbit(a), -0.0, carry)
    return s, carry


def exact_unshift(shifted, carry, offset):
    """Recover the values passed to :func:`exact_shift` bit for bit."""
    s, c, o = np.broadcast_arrays(np.asarray(shifted, float), np.asarray(carry, float),
                                  np.asarray(offset, float))
    out = np.fromiter((math.fsum(t) for t in zip(s.ravel().tolist(), c.ravel().tolist(),
                                                  o.ravel().tolist())),
                      dtype=float, count=s.size)
    out = np.where((out == 0) & np.signbit(c.ravel()), -0.0, out)
    return out.reshape(s.shape)


@dataclass(frozen=True, eq=False)
class Localized:
    """Residuals after removing the pilot's local linear trend."""

    residuals: np.ndarray
    offsets: np.ndarray
    carry: np.ndarray
    pilot_ref: str

    def __len__(self):
        return self.residuals.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.residuals, dtype=dtype)

    def undo(self):
        """Original responses, bit for bit."""
        return exact_unshift(self.residuals, self.carry, self.offsets)


def localize(half: RegressionSample, pilot: PilotEstimate, partition: BlockPartition):
    """``Z_j = Y_j - theta_hat(xi_k) - theta_hat'(xi_k) (x_j - xi_k)`` with ``x_j`` in block ``k``."""
    xi = partition.centers[partition.index_map]
    v, d = pilot.at(partition.centers)
    k = partition.index_map
    offsets = v[k] + d[k] * (np.asarray(half.xs) - xi)
    z, carry = exact_shift(half.ys, offsets)
    return Localized(z, offsets, carry, pilot.ident)


def unlocalize(half: RegressionSample, localized: Localized):
    """Rebuild the half sample from its localised residuals."""
    return replace(half, ys=localized.undo())


# ---------------------------------------------------------------------------
# Block extremes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockStatistics:
    """Per-block extremes of the localised residuals and their recentred forms.

    ``s_recentered = s + theta_hat(xi) + 1`` and
    ``S_recentered = S + theta_hat(xi) - 1`` are stored with rounding carries so
    that :meth:`undo_recentering` is exact.
    """

    s: np.ndarray
    S: np.ndarray
    counts: np.ndarray
    s_recentered: np.ndarray | None = None
    S_recentered: np.ndarray | None = None
    pilot_ref: str = ""
    _carry: tuple = field(default=(), repr=False)

    @property
    def m(self):
        return self.s.size

    def undo_recentering(self):
        if self.s_recentered is None:
            raise ValidationError("statistics were not recentred")
        (cs, cS, os_, oS) = self._carry
        return (exact_unshift(self.s_recentered, cs, os_),
                exact_unshift(self.S_recentered, cS, oS))


def block_extremes(residuals, partition: BlockPartition, pilot: PilotEstimate | None = None):
    """Exact block minima and maxima, recentred with the pilot when given.

    Raises
    ------
    ValidationError
        If some block holds no design point.
    """
    z = np.asarray(residuals, dtype=float)
    if z.size != partition.index_map.size:
        raise ValidationError("residuals and partition differ in length")
    mins, maxs, counts = _kernels.block_extrema(partition.index_map.astype(np.int64), z,
                                                partition.m)
    if np.any(counts == 0):
        raise ValidationError(f"{int(np.sum(counts == 0))} empty block(s); m too large for n")
    if pilot is None:
        return BlockStatistics(mins, maxs, counts)
    v, _ = pilot.at(partition.centers)
    off_s = -(v + 1.0)
    off_S = -(v - 1.0)
    s_rec, cs = exact_shift(mins, off_s)
    S_rec, cS = exact_shift(maxs, off_S)
    return BlockStatistics(mins, maxs, counts, s_rec, S_rec, pilot.ident, (cs, cS, off_s, off_S))


# ---------------------------------------------------------------------------
# Randomisation
# ---------------------------------------------------------------------------


def _restricted_design(rng, design, a, b):
    Fa, Fb = design.cdf(a), design.cdf(b)
    x = design.quantile(Fa + rng.random(a.size) * (Fb - Fa))
    return np.clip(x, a, b)


def _one_side(rng, stats, slopes, partition, spec, scale, lower, pass_no, seed):
    m = partition.m
    e = partition.edges
    a, b, xi = e[:-1], e[1:], partition.centers
    y_lo, y_hi = spec.y_bounds
    level = stats.S_recentered if lower else stats.s_recentered
    jump = spec.error.jump_right if lower else spec.error.jump_left
    dF = spec.design.mass(a, b)
    c = scale * jump * m * dF
    area = line_region_area(a, b, level, slopes, xi, y_lo, y_hi, below=lower)
    masses = c * area
    x_ext = _restricted_design(rng, spec.design, a, b)
    y_ext = level + slopes * (x_ext - xi)
    counts = rng.poisson(masses)
    cloud, _ = sample_line_blocks(rng, counts, a, b, level, slopes, xi, y_lo, y_hi, below=lower)
    pts = np.concatenate([np.column_stack([x_ext, y_ext]), cloud])
    extreme = np.concatenate([np.ones(m, dtype=np.int64), np.zeros(len(cloud), dtype=np.int64)])
    marks = {"pass": np.full(len(pts), pass_no, dtype=np.int64), "extreme": extreme}
    tag = "X_l" if lower else "X_u"
    return PointProcessRealization(pts, tag, float(masses.sum()), int(seed), float(scale),
                                   spec.y_bounds, spec.hash, marks)


def randomize_to_ppp(stats: BlockStatistics, pilot: PilotEstimate, partition: BlockPartition,
                     spec: ExperimentSpec, side_pair=None, seed=0, scale=None, pass_no=1):
    """Rebuild Poisson clouds from recentred block extremes.

    In block ``k`` the lower process gets one marked point on the line
    ``S''_k + theta_hat'(xi_k) (x - xi_k)`` at ``x ~ f_D`` restricted to
    ``I_k``, plus a Poisson cloud below that line with intensity
    ``scale * phi(1) * m * int_{I_k} f_D``. The upper process mirrors this
    above the line through ``s''_k`` with ``phi(-1)``.

    Parameters
    ----------
    stats : BlockStatistics
        Must carry recentred extremes.
    pilot : PilotEstimate
        Supplies the block slopes.
    partition : BlockPartition
    spec : ExperimentSpec
    side_pair : tuple of str, optional
        Subset of ``("lower", "upper")``; a one-sided error law drops the
        lower side by default.
    seed : int
    scale : float, optional
        Defaults to ``n / 2``.
    pass_no : int
        Stored in the ``pass`` mark.

    Returns
    -------
    tuple
        ``(X_l, X_u)``; an omitted side is ``None``.
    """
    if side_pair is None:
        side_pair = ("upper",) if spec.error.one_sided else ("lower", "upper")
    scale = spec.n / 2.0 if scale is None else float(scale)
    if partition.m == 0 or stats.m == 0:
        dom = spec.y_bounds
        return (empty_realization("X_l", dom, scale, seed, spec.hash),
                empty_realization("X_u", dom, scale, seed, spec.hash))
    if stats.S_recentered is None:
        raise ValidationError("block statistics must be recentred with the pilot")
    _, slopes = pilot.at(partition.centers)
    out = []
    for side in ("lower", "upper"):
        if side not in side_pair:
            out.append(None)
            continue
        s = derive_seed(seed, side)
        out.append(_one_side(make_rng(s), stats, slopes, partition, spec, scale,
                             side == "lower", pass_no, s))
    return tuple(out)


# ---------------------------------------------------------------------------
# Superposition and thinning
# ---------------------------------------------------------------------------


def superpose(xa: PointProcessRealization, xb: PointProcessRealization, tag=None):
    """Union of two realisations on the same domain; masses and scales add."""
    if xa is None:
        return xb
    if xb is None:
        return xa
    if tuple(xa.domain) != tuple(xb.domain):
        raise ValidationError("cannot superpose realisations on different domains")
    if tag is None:
        tag = xa.process_tag if xa.process_tag == xb.process_tag else "other"
    keys = sorted(set(xa.marks) | set(xb.marks))
    marks = {}
    for k in keys:
        ma = xa.marks.get(k, np.zeros(len(xa), dtype=np.int64))
        mb = xb.marks.get(k, np.zeros(len(xb), dtype=np.int64))
        marks[k] = np.concatenate([ma, mb])
    return PointProcessRealization(np.concatenate([xa.points, xb.points]), tag,
                                   xa.intensity_mass + xb.intensity_mass, xa.seed,
                                   xa.scale + xb.scale, tuple(xa.domain), xa.spec_ref, marks)


def thin_ppp(x: PointProcessRealization, p, seed):
    """Assign every point independently to the first output with probability ``p``."""
    if not (0.0 <= p <= 1.0):
        raise ValidationError("thinning probability must lie in [0, 1]")
    rng = make_rng(seed)
    keep = rng.random(len(x)) < p

    def part(mask, q):
        return PointProcessRealization(x.points[mask], x.process_tag, x.intensity_mass * q,
                                       int(seed), x.scale * q, tuple(x.domain), x.spec_ref,
                                       {k: v[mask] for k, v in x.marks.items()})

    return part(keep, p), part(~keep, 1.0 - p)


# ---------------------------------------------------------------------------
# Forward transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformInfo:
    """Sidecar data describing one forward transform."""

    m: int
    seeds: dict
    bandwidths: dict
    pilots: dict

    def to_dict(self):
        return {"m": self.m, "seeds": self.seeds, "bandwidths": self.bandwidths,
                "pilots": self.pilots}


def _pilot_summary(p: PilotEstimate):
    return {"ident": p.ident, "h": float(p.bandwidth), "truncated": bool(p.truncated),
            "grid_size": int(p.grid.size),
            "value_range": [float(np.min(p.values)), float(np.max(p.values))],
            "slope_range": [float(np.min(p.derivs)), float(np.max(p.derivs))]}


def forward_transform(sample: RegressionSample, spec: ExperimentSpec, seed, m=None,
                      bandwidth_const=1.0, pilot_override=None, return_info=False):
    """Map a regression sample to the pair ``(X_1, X_2)``.

    Parameters
    ----------
    sample : RegressionSample
        Only the observations are used; the curve is never consulted.
    spec : ExperimentSpec
        Design, error jumps and class constants.
    seed : int
        Master seed for both randomisation passes.
    m : int, optional
        Block count, default :func:`default_block_count`.
    bandwidth_const : float
        Pilot bandwidth constant.
    pilot_override : PilotEstimate or callable, optional
        Use this pilot in both passes instead of estimating (oracle mode).
        A callable receives the block centres.
    return_info : bool
        Also return a :class:`TransformInfo`.
    """
    n = len(sample)
    if n % 2:
        raise ValidationError("forward transform needs an even sample size")
    m = default_block_count(n, spec.alpha) if m is None else int(m)
    half_a, half_b = split_sample(sample)
    seeds = {"pass1": derive_seed(seed, "pass1"), "pass2": derive_seed(seed, "pass2")}
    centers = (np.arange(m) + 0.5) / m

    def given_pilot():
        if pilot_override is None:
            return None
        return pilot_override(centers) if callable(pilot_override) else pilot_override

    # pass 1: pilot from the even half, transform the odd half
    part_a = BlockPartition.build(half_a.xs, m, half_a.index)
    pilot1 = given_pilot() or pilot_estimate(half_b, spec, bandwidth_const, centers)
    stats_a = block_extremes(localize(half_a, pilot1, part_a), part_a, pilot1)
    xl, xu = randomize_to_ppp(stats_a, pilot1, part_a, spec, seed=seeds["pass1"], pass_no=1)

    # pass 2: pilot from the pass-1 processes, transform the even half
    part_b = BlockPartition.build(half_b.xs, m, half_b.index)
    pilot2 = given_pilot() or pilot_estimate((xl, xu), spec, bandwidth_const, centers)
    stats_b = block_extremes(localize(half_b, pilot2, part_b), part_b, pilot2)
    xl2, xu2 = randomize_to_ppp(stats_b, pilot2, part_b, spec, seed=seeds["pass2"], pass_no=2)

    dom = spec.y_bounds
    x1 = superpose(xl, xl2, tag="X1_lower_region")
    x2 = superpose(xu, xu2, tag="X2_upper_region")
    if x1 is None:
        x1 = empty_realization("X1_lower_region", dom, 0.0, seed, spec.hash)
    if x2 is None:
        x2 = empty_realization("X2_upper_region", dom, 0.0, seed, spec.hash)
    x1 = replace(x1, seed=int(seed))
    x2 = replace(x2, seed=int(seed))
    if not return_info:
        return x1, x2
    info = TransformInfo(m, seeds, {"pass1": float(pilot1.bandwidth),
                                    "pass2": float(pilot2.bandwidth)},
                         {"pass1": _pilot_summary(pilot1), "pass2": _pilot_summary(pilot2)})
    return x1, x2, info
