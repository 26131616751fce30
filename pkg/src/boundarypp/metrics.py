"""Distances, distributional checks, rate studies and lower-bound constructions."""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .errors import InfeasibleError, NumericalError, ValidationError
from .estimators import (DERIV_CAP_FACTOR, admissible_fit_ppp, admissible_fit_regression,
                         bandwidth, window)
from .model import (ExperimentSpec, ParameterFunction, bump, bump_kernel, design_points,
                    holder_band, holder_norm, oscillating_sine, quadratic_jump_error,
                    uniform_design, uniform_error, validate_parameter, zero_function)
from .rng import derive_seed, make_rng
from .samplers import (BelowCurve, AboveCurve, BlockConstantDensity, IntensityFunction,
                       boundary_intensities, integrate_1d, sample_boundary_pair, sample_errors,
                       sample_ppp)

KINDS = ("hellinger_sq", "ks", "tv_bound")
METHODS = ("closed_form", "quadrature", "monte_carlo")


@dataclass(frozen=True)
class DistanceReport:
    """A distance value with provenance.

    Attributes
    ----------
    kind : str
        ``hellinger_sq``, ``ks`` or ``tv_bound``.
    value : float
    method : str
        ``closed_form``, ``quadrature`` or ``monte_carlo``.
    error_estimate : float
    inputs_hash : str
    extras : dict
    """

    kind: str
    value: float
    method: str
    error_estimate: float = 0.0
    inputs_hash: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS or self.method not in METHODS:
            raise ValidationError("unknown report kind or method")
        hi = 2.0 if self.kind == "hellinger_sq" else 1.0
        if not (-1e-12 <= self.value <= hi + 1e-12):
            raise NumericalError(f"{self.kind} value {self.value} outside [0, {hi}]")

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "method": self.method,
                "error_estimate": self.error_estimate, "inputs_hash": self.inputs_hash,
                **({"extras": self.extras} if self.extras else {})}

    def to_text(self):
        return (f"{self.kind:14s} {self.value:.12g}  method={self.method} "
                f"err~{self.error_estimate:.3g}")


def _hash(*parts):
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Hellinger distances between Poisson processes
# ---------------------------------------------------------------------------


def _as_tuple(lam):
    return tuple(lam) if isinstance(lam, (tuple, list)) else (lam,)


def _crossings(fns, a, b, grid=2049):
    """Sign changes of a set of functions on ``[a, b]``, refined by root finding."""
    xs = np.linspace(a, b, grid)
    out = []
    for f in fns:
        v = f(xs)
        finite = np.isfinite(v)
        s = np.sign(np.where(finite, v, 0.0))
        idx = np.flatnonzero((s[:-1] * s[1:] < 0) & finite[:-1] & finite[1:])
        for i in idx:
            g = lambda t: float(f(np.array([t]))[0])  # noqa: E731
            out.append(optimize.brentq(g, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
        # only the ends of runs of exact zeros matter
        zero = (s == 0) & finite
        edge = zero[1:-1] & ~(zero[:-2] & zero[2:])
        out.extend(xs[1:-1][edge].tolist())
    return out


def _pair_integral(l1: IntensityFunction, l2: IntensityFunction):
    """``int (sqrt(l1) - sqrt(l2))^2`` for indicator-region intensities."""
    if tuple(l1.domain) != tuple(l2.domain):
        raise ValidationError("intensities live on different domains")

    def parts(x):
        a1, b1 = l1.x_range
        a2, b2 = l2.x_range
        v1 = np.where((x >= a1) & (x <= b1), l1.scale * l1.design_density.density(x), 0.0)
        v2 = np.where((x >= a2) & (x <= b2), l2.scale * l2.design_density.density(x), 0.0)
        lo1, hi1 = l1.vertical(x)
        lo2, hi2 = l2.vertical(x)
        r1 = np.maximum(hi1 - lo1, 0.0)
        r2 = np.maximum(hi2 - lo2, 0.0)
        both = np.maximum(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0)
        both = np.minimum(both, np.minimum(r1, r2))
        return v1, v2, r1, r2, both, (lo1, hi1, lo2, hi2)

    def integrand(x):
        v1, v2, r1, r2, both, _ = parts(x)
        return v1 * (r1 - both) + v2 * (r2 - both) + (np.sqrt(v1) - np.sqrt(v2)) ** 2 * both

    pts = set(l1.breakpoints()) | set(l2.breakpoints())
    for lam in (l1, l2):
        if lam.block_restriction is not None:
            pts.update(lam.block_restriction)
    diffs = [lambda x: parts(x)[5][1] - parts(x)[5][3],
             lambda x: parts(x)[5][0] - parts(x)[5][2],
             lambda x: parts(x)[5][1] - parts(x)[5][2],
             lambda x: parts(x)[5][0] - parts(x)[5][3]]
    pts.update(_crossings(diffs, 0.0, 1.0))
    val, err = integrate_1d(integrand, 0.0, 1.0, sorted(p for p in pts if 0 < p < 1))
    return max(val, 0.0), err


def hellinger_ppp(lam1, lam2):
    """Squared Hellinger distance between Poisson process laws.

    ``H^2 = 2 (1 - exp(-int (sqrt(lam1) - sqrt(lam2))^2 / 2))``. Either
    argument may be a tuple of intensities describing independent processes
    (e.g. the pair ``(lambda_1, lambda_2)``); the integrals then add.

    Examples
    --------
    >>> from boundarypp.model import uniform_design
    >>> from boundarypp.samplers import Band, IntensityFunction
    >>> a = IntensityFunction(uniform_design(), Band(0, 1), 4.0, (0, 1))
    >>> b = IntensityFunction(uniform_design(), Band(0, 1), 1.0, (0, 1))
    >>> round(hellinger_ppp(a, b).value, 6)
    0.786939
    """
    t1, t2 = _as_tuple(lam1), _as_tuple(lam2)
    if len(t1) != len(t2):
        raise ValidationError("process tuples differ in length")
    total, err = 0.0, 0.0
    for a, b in zip(t1, t2):
        v, e = _pair_integral(a, b)
        total += v
        err += e
    h2 = 2.0 * (1.0 - math.exp(-total / 2.0))
    return DistanceReport("hellinger_sq", h2, "quadrature", err * math.exp(-total / 2.0),
                          _hash("hellinger_ppp", total), {"integral": total})


def l1_distance(theta1, theta2, design):
    """``int |theta1 - theta2| f_D`` by quadrature split at sign changes."""
    diff = lambda x: theta1.eval(x) - theta2.eval(x)  # noqa: E731
    pts = set(theta1.breakpoints) | set(theta2.breakpoints)
    pts.update(_crossings([diff], 0.0, 1.0))
    return integrate_1d(lambda x: np.abs(diff(x)) * design.density(x), 0.0, 1.0,
                        sorted(p for p in pts if 0 < p < 1))


def hellinger_boundary_closed_form(theta1, theta2, n, J, design):
    """``H^2 = 2 (1 - exp(-(n/2) J int |theta1 - theta2| f_D))`` for boundary pairs."""
    if J <= 0:
        raise ValidationError("J must be positive")
    dist, err = l1_distance(theta1, theta2, design)
    expo = 0.5 * n * J * dist
    h2 = 2.0 * (1.0 - math.exp(-expo))
    return DistanceReport("hellinger_sq", h2, "closed_form",
                          n * J * err * math.exp(-expo), _hash("boundary", n, J, dist),
                          {"l1": dist})


def hellinger_exponential(mu1, mu2):
    """Squared Hellinger distance between ``Exp(mu1)`` and ``Exp(mu2)``.

    Examples
    --------
    >>> round(hellinger_exponential(2.0, 1.0), 6)
    0.114382
    """
    if mu1 <= 0 or mu2 <= 0:
        raise ValidationError("exponential rates must be positive")
    return 2.0 * (mu1 - mu2) ** 2 / ((mu1 + mu2) * (math.sqrt(mu1) + math.sqrt(mu2)) ** 2)


def tv_bounds(h2):
    """Le Cam bounds ``(H^2/2, H sqrt(1 - H^2/4))`` on total variation."""
    h2 = float(h2)
    return 0.5 * h2, math.sqrt(h2) * math.sqrt(max(0.0, 1.0 - h2 / 4.0))


# ---------------------------------------------------------------------------
# Block-extreme approximation
# ---------------------------------------------------------------------------


def _graded_panels(scale, top, top_scale=None):
    """Geometric panels refined toward 0, and toward ``top`` when ``top_scale`` is set."""
    def side(sc, limit):
        edges, b = [0.0], sc
        while b < limit:
            edges.append(b)
            b *= 2.0
        return edges + [limit]

    if top_scale is None:
        return np.array(side(scale, top))
    left = np.array(side(scale, top / 2))
    right = top - np.array(side(top_scale, top / 2))[::-1]
    return np.concatenate([left, right[1:]])


def _panel_nodes(edges, order):
    z, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return (mid[:, None] + half[:, None] * z).ravel(), (half[:, None] * w).ravel()


_CDF_GL = np.polynomial.legendre.leggauss(24)


def _partial_cdf(fw, start, direction, t):
    """``int_0^t fw(start + direction * s) ds`` by Gauss-Legendre on ``[0, t]``."""
    z, w = _CDF_GL
    s = 0.5 * t[:, None] * (1.0 + z[None, :])
    return 0.5 * t * np.sum(w * fw(start + direction * s), axis=1)


def hypoexp_survival(mu1, mu2, t):
    """``P(E1/mu1 + E2/mu2 > t)`` for independent standard exponentials."""
    if abs(mu1 - mu2) <= 1e-9 * max(mu1, mu2):
        mu = 0.5 * (mu1 + mu2)
        return math.exp(-mu * t) * (1.0 + mu * t)
    return (mu2 * math.exp(-mu1 * t) - mu1 * math.exp(-mu2 * t)) / (mu2 - mu1)


def _min_max_h2(l, fw, lo_pt, hi_pt, order):
    mu1 = (l - 2) * float(fw(np.array([lo_pt]))[0])
    mu2 = (l - 2) * float(fw(np.array([hi_pt]))[0])
    u, wu = _panel_nodes(_graded_panels(1.0 / (8.0 * l), 2.0), order)
    # the exact density vanishes like (y - x)^(l-2) on the diagonal w = 1
    r, wr = _panel_nodes(_graded_panels(1.0 / (16.0 * l), 1.0, top_scale=1e-9), order)
    Gu = _partial_cdf(fw, lo_pt, 1.0, u)
    log_fx = np.log(fw(lo_pt + u))
    total = 0.0
    for i in range(u.size):
        v = (2.0 - u[i]) * r
        Gv = _partial_cdf(fw, hi_pt, -1.0, v)
        rest = np.maximum(1.0 - Gu[i] - Gv, 1e-300)
        log_f = (math.log(l * (l - 1.0)) + log_fx[i] + np.log(fw(hi_pt - v))
                 + (l - 2.0) * np.log(rest))
        log_g = math.log(mu1 * mu2) - mu1 * u[i] - mu2 * v
        val = (np.exp(0.5 * log_f) - np.exp(0.5 * log_g)) ** 2
        total += wu[i] * (2.0 - u[i]) * float(np.sum(wr * val))
    return total + hypoexp_survival(mu1, mu2, 2.0)


def block_extreme_hellinger(l, f_W=None, delta0=0.0, orders=(24, 16), return_error=False):
    """Squared Hellinger distance between the joint law of (min, max) of ``l``
    draws and its product-exponential surrogate.

    Parameters
    ----------
    l : int
        Block size, at least 3.
    f_W : ErrorDensity, optional
        Shape on ``[-1, 1]``; the draws have density ``f_W(x - delta0)`` on
        ``[delta0 - 1, delta0 + 1]``. Uniform by default.
    delta0 : float
        Location shift.
    orders : tuple of int
        Gauss-Legendre orders per panel; the difference of the two results
        is the error estimate.
    return_error : bool

    Returns
    -------
    float or tuple
        ``H^2`` (and the error estimate).

    Notes
    -----
    The exact density on ``x <= y`` is
    ``l (l-1) f(x) f(y) (F(y) - F(x))^(l-2)``. The surrogate has
    ``x - (delta0 - 1) ~ Exp((l-2) f(delta0-1))`` independent of
    ``(delta0 + 1) - y ~ Exp((l-2) f(delta0+1))``.
    """
    if int(l) != l or l < 3:
        raise ValidationError("block size must be an integer >= 3")
    g = uniform_error() if f_W is None else f_W
    delta0 = float(delta0)
    fw = lambda x: g.phi(np.clip(np.asarray(x, float) - delta0, -1.0, 1.0))  # noqa: E731
    lo_pt, hi_pt = delta0 - 1.0, delta0 + 1.0
    fine = _min_max_h2(int(l), fw, lo_pt, hi_pt, orders[0])
    coarse = _min_max_h2(int(l), fw, lo_pt, hi_pt, orders[1])
    err = abs(fine - coarse)
    if err > 1e-7 and err > 1e-4 * abs(fine):
        raise NumericalError(f"block-extreme quadrature did not converge (err {err:.3g})",
                             residual=err)
    fine = min(max(fine, 0.0), 2.0)
    return (fine, err) if return_error else fine


def min_uniform_hellinger(I, orders=(30, 20), return_error=False):
    """``H^2`` between the minimum of ``I`` uniforms on [0, 1] and ``Exp(I)``."""
    if int(I) != I or I < 1:
        raise ValidationError("I must be a positive integer")
    I = int(I)

    def run(order):
        x, w = _panel_nodes(_graded_panels(1.0 / (16.0 * I), 1.0), order)
        log_f = math.log(I) + (I - 1) * np.log1p(-np.minimum(x, 1 - 1e-300))
        log_g = math.log(I) - I * x
        return float(np.sum(w * (np.exp(0.5 * log_f) - np.exp(0.5 * log_g)) ** 2)) + math.exp(-I)

    fine, coarse = run(orders[0]), run(orders[1])
    err = abs(fine - coarse)
    if err > 1e-9 and err > 1e-6 * fine:
        raise NumericalError("min-of-uniforms quadrature did not converge", residual=err)
    return (fine, err) if return_error else fine


def loglog_slope(xs, ys, weights=None):
    """Least-squares slope of ``log ys`` on ``log xs``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    w = np.ones_like(lx) if weights is None else np.asarray(weights, float)
    xm = np.sum(w * lx) / np.sum(w)
    ym = np.sum(w * ly) / np.sum(w)
    sxx = np.sum(w * (lx - xm) ** 2)
    return float(np.sum(w * (lx - xm) * (ly - ym)) / sxx), float(sxx)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov and the block extreme laws
# ---------------------------------------------------------------------------


def ks_uniform(u):
    """One-sample KS distance of ``u`` from Uniform(0, 1)."""
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    if n == 0:
        raise ValidationError("KS needs at least one value")
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def ks_distance(sample, cdf):
    """One-sample KS distance of ``sample`` from a continuous ``cdf``."""
    return ks_uniform(cdf(np.asarray(sample, dtype=float)))


def extreme_law_cdf(x, theta_k, rate):
    """``P[X_{l,k} <= x] = exp(-(theta_k - x) rate)`` for ``x <= theta_k``.

    Examples
    --------
    >>> round(float(extreme_law_cdf(-0.2, 0.0, 5.0)), 6)
    0.367879
    """
    x = np.asarray(x, dtype=float)
    return np.where(x >= theta_k, 1.0, np.exp(-(theta_k - np.minimum(x, theta_k)) * rate))


def block_rates(design, m, scale, jump):
    """``rho_k * phi = scale * phi * int_{I_k} f_D`` for every block."""
    e = np.arange(m + 1) / m
    return scale * jump * design.mass(e[:-1], e[1:])


def extreme_law_pits(real, theta, m, spec, rng):
    """Probability-integral transforms of the per-block extremes of one realisation.

    Returns ``(pits, atoms)`` where ``atoms`` counts blocks without points
    (their PIT is drawn uniformly below the truncation atom).
    """
    from .equivalence import block_index
    from . import _kernels

    centers = (np.arange(m) + 0.5) / m
    th = theta.eval(centers)
    lower = real.is_lower
    jump = spec.error.jump_right if lower else spec.error.jump_left
    rate = block_rates(spec.design, m, real.scale, jump)
    y_lo, y_hi = real.domain
    k = block_index(real.x, m).astype(np.int64)
    mins, maxs, counts = _kernels.block_extrema(k, real.y, m)
    empty = counts == 0
    if lower:
        ext = np.where(empty, y_lo, maxs)
        F = np.exp(-np.clip(th - ext, 0.0, None) * rate)
        atom = np.exp(-(th - y_lo) * rate)
        pits = np.where(empty, rng.random(m) * atom, F)
    else:
        ext = np.where(empty, y_hi, mins)
        F = 1.0 - np.exp(-np.clip(ext - th, 0.0, None) * rate)
        atom = np.exp(-(y_hi - th) * rate)
        pits = np.where(empty, 1.0 - rng.random(m) * atom, F)
    return pits, int(empty.sum())


def extreme_law_check(realizations, theta, partition, spec, seed=0):
    """Pooled-PIT KS check of the per-block extreme laws.

    For a block-constant curve the largest lower-process ordinate in block
    ``k`` has distribution ``exp(-(theta_k - x) rate_k)`` with
    ``rate_k = scale * phi(1) * int_{I_k} f_D`` (mirrored for the upper
    process). Transforms from all blocks and realisations are pooled.

    Parameters
    ----------
    realizations : sequence of PointProcessRealization
        Lower or upper processes (identified by tag).
    theta : ParameterFunction
        Block-constant curve.
    partition : BlockPartition or int
        Block structure (only ``m`` is used).
    spec : ExperimentSpec
    seed : int
        Stream for the randomised PIT of empty blocks.
    """
    m = partition if isinstance(partition, (int, np.integer)) else partition.m
    rng = make_rng(derive_seed(seed, "pit"))
    pits, atoms = [], 0
    for real in realizations:
        p, a = extreme_law_pits(real, theta, int(m), spec, rng)
        pits.append(p)
        atoms += a
    u = np.concatenate(pits)
    d = ks_uniform(u)
    return DistanceReport("ks", d, "monte_carlo", 1.63 / math.sqrt(u.size),
                          _hash("extreme", int(m), u.size, d),
                          {"blocks": int(u.size), "atoms": atoms})


def step_intensities(theta_step, spec, m, scale):
    """Block-constant-density boundary intensities for a step curve."""
    dens = BlockConstantDensity(spec.design, m)
    dom = spec.y_bounds
    return (IntensityFunction(dens, BelowCurve(theta_step), scale * spec.error.jump_right, dom),
            IntensityFunction(dens, AboveCurve(theta_step), scale * spec.error.jump_left, dom))


def block_density_gap(theta, spec, m, scale=None):
    """Squared Hellinger distance between exact and block-averaged design densities.

    Compares the boundary pair built on ``f_D`` with the pair built on the
    block-constant density ``m * int_{I_k} f_D``. For Lipschitz ``f_D`` the
    value shrinks like ``scale * m**-2``.
    """
    exact = boundary_intensities(theta, spec, scale)
    dens = BlockConstantDensity(spec.design, int(m))
    blocked = tuple(IntensityFunction(dens, lam.vertical_region, lam.scale, lam.domain)
                    for lam in exact)
    rep = hellinger_ppp(exact, blocked)
    rep.extras["m"] = int(m)
    return rep


def step_realizations(theta_step, spec, m, reps, seed, scale=None):
    """``reps`` independent lower/upper pairs of the block-constant-density experiment."""
    scale = float(spec.n if scale is None else scale)
    lam1, lam2 = step_intensities(theta_step, spec, m, scale)
    out = []
    for r in range(reps):
        out.append(replace(sample_ppp(lam1, derive_seed(seed, "xl", r), "X1_lower_region"),
                           scale=scale))
        out.append(replace(sample_ppp(lam2, derive_seed(seed, "xu", r), "X2_upper_region"),
                           scale=scale))
    return out


# ---------------------------------------------------------------------------
# Rate studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateStudyResult:
    """Monte Carlo risks with a weighted log-log slope."""

    ns: tuple
    risks: tuple
    risk_se: tuple
    slope: float
    slope_se: float
    theory_slope: float
    target: str = "value"
    degenerate: bool = False
    dropped: tuple = ()

    def __post_init__(self):
        if len(self.ns) != len(self.risks) or len(self.ns) < 3:
            raise ValidationError("a rate study needs at least three sample sizes")
        if any(r <= 0 for r in self.risks):
            raise ValidationError("risks must be positive")

    def to_rows(self):
        return [(n, r, s) for n, r, s in zip(self.ns, self.risks, self.risk_se)]

    def to_dict(self):
        return {"target": self.target, "ns": list(self.ns), "risks": list(self.risks),
                "risk_se": list(self.risk_se), "slope": self.slope, "slope_se": self.slope_se,
                "theory_slope": self.theory_slope, "degenerate": self.degenerate,
                "dropped": list(self.dropped)}


def fit_rate(ns, risks, risk_se, theory_slope, target="value", dropped=()):
    """Weighted least-squares slope of ``log risk`` against ``log n``."""
    ns, risks, se = (np.asarray(v, float) for v in (ns, risks, risk_se))
    if ns.size < 3:
        raise ValidationError("need at least three sample sizes")
    if np.all(se > 0):
        w = (risks / se) ** 2
        slope, sxx = loglog_slope(ns, risks, w)
        slope_se, degenerate = 1.0 / math.sqrt(sxx), False
    else:
        slope, _ = loglog_slope(ns, risks)
        slope_se, degenerate = math.inf, True
    return RateStudyResult(tuple(int(n) for n in ns), tuple(risks.tolist()),
                           tuple(se.tolist()), slope, slope_se, theory_slope, target,
                           degenerate, tuple(dropped))


def theory_slopes(alpha):
    """MSE exponents for values and first derivatives."""
    return {"value": -2.0 * (2.0 + alpha) / (3.0 + alpha),
            "derivative": -2.0 * (1.0 + alpha) / (3.0 + alpha)}


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def rate_study(estimator_config, theta, spec, ns, reps, seed, experiment="regression",
               x0=0.5, workers=None):
    """Monte Carlo pointwise risks of the pilot estimator over sample sizes.

    Parameters
    ----------
    estimator_config : dict
        ``bandwidth_const`` (default 1.0) and optional ``gamma``.
    theta : ParameterFunction
    spec : ExperimentSpec
        Template; its ``n`` is replaced by each entry of ``ns``.
    ns : sequence of int
        At least three sample sizes.
    reps : int
    seed : int
    experiment : {"regression", "ppp"}
        For ``"ppp"`` the processes are simulated on the strip above the
        estimation window only; the estimate depends on nothing else.
    x0 : float
    workers : int, optional
        Thread count for replicate-level parallelism.

    Returns
    -------
    dict
        ``{"value": RateStudyResult, "derivative": RateStudyResult}``.
    """
    if experiment not in ("regression", "ppp"):
        raise ValidationError("experiment must be 'regression' or 'ppp'")
    if len(ns) < 3:
        raise ValidationError("a rate study needs at least three sample sizes")
    report = validate_parameter(theta)
    if not report.passed:
        raise ValidationError("parameter fails class validation:\n" + str(report))
    const = float(estimator_config.get("bandwidth_const", 1.0))
    C = spec.c_theta
    t0, d0 = float(theta.eval(np.array([x0]))[0]), float(theta.deriv1(np.array([x0]))[0])
    cap = DERIV_CAP_FACTOR * C
    kept, risks, ses, dropped = [], {"value": [], "derivative": []}, {"value": [], "derivative": []}, []
    for n in ns:
        sp = spec.with_n(n)
        h = bandwidth(n, sp.alpha, const)
        gamma = float(estimator_config.get("gamma", holder_band(h, C)))
        if experiment == "regression":
            xs = design_points(n, sp.design)
            base = theta.eval(xs)

            def one(r, n=n, h=h, gamma=gamma, xs=xs, base=base, sp=sp):
                rng = make_rng(derive_seed(seed, f"rate-reg-{n}", r))
                ys = base + sample_errors(sp.error, rng, n)
                from .samplers import RegressionSample
                s = RegressionSample(xs, ys, n, 0, sp.hash)
                return admissible_fit_regression(s, x0, h, gamma, sp.alpha).coeffs
        else:
            lam1, lam2 = boundary_intensities(theta, sp, block=window(x0, h))
            _ = lam1.mass, lam2.mass

            def one(r, n=n, h=h, gamma=gamma, lam1=lam1, lam2=lam2, sp=sp):
                x1 = sample_ppp(lam1, derive_seed(seed, f"rate-ppp1-{n}", r), "X1_lower_region")
                x2 = sample_ppp(lam2, derive_seed(seed, f"rate-ppp2-{n}", r), "X2_upper_region")
                return admissible_fit_ppp(x1, x2, x0, h, gamma, sp.alpha, C).coeffs
        try:
            coeffs = np.array(_map(one, range(reps), workers))
        except InfeasibleError as exc:
            warnings.warn(f"dropping n={n}: {exc}", RuntimeWarning, stacklevel=2)
            dropped.append(int(n))
            continue
        ev = np.clip(coeffs[:, 0], -C, C) - t0
        ed = np.clip(coeffs[:, 1], -cap, cap) - d0
        kept.append(n)
        for key, e in (("value", ev), ("derivative", ed)):
            sq = e * e
            risks[key].append(float(np.mean(sq)))
            ses[key].append(float(np.std(sq, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0)
    if len(kept) < 3:
        raise NumericalError(f"only {len(kept)} sample sizes survived; need 3")
    th = theory_slopes(spec.alpha)
    return {k: fit_rate(kept, risks[k], ses[k], th[k], k, dropped) for k in ("value", "derivative")}


# ---------------------------------------------------------------------------
# Lower-bound construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LowerBoundPair:
    """Two-point construction for a pointwise lower bound."""

    theta1: ParameterFunction
    theta2: ParameterFunction
    separation: float
    hellinger: float
    h: float
    separation_formula: float


def lower_bound_pair(s, L, k, n, J, design=None, x0=0.5, kernel=None):
    """Bump alternative ``L h^s K((x - x0)/h)`` with ``h = (L n J f_D(x0))^(-1/(s+1))``.

    Parameters
    ----------
    s, L : float
        Smoothness and radius of the class.
    k : int
        Derivative order of the loss.
    n : float
    J : float
        Total jump size.
    design : DesignSpec, optional
    x0 : float
        Interior point.
    kernel : ParameterFunction, optional
        Supported in ``[-1/2, 1/2]`` with Hoelder-``s`` norm at most one and
        positive ``k``-th derivative at zero.

    Returns
    -------
    LowerBoundPair
        ``hellinger`` is ``H`` (not squared).
    """
    design = uniform_design() if design is None else design
    if kernel is None:
        kernel = bump_kernel(k, s)
    if k not in (0, 1, 2) or k > s:
        raise ValidationError("derivative order must be 0, 1 or 2 and at most s")
    if holder_norm(kernel, s) > 1.0 + 1e-9:
        raise ValidationError("kernel is not in the unit Hoelder ball")
    probe = np.array([-0.5 - 1e-9, 0.5 + 1e-9, -0.75, 0.75])
    if np.any(kernel.eval(probe) != 0):
        raise ValidationError("kernel support exceeds [-1/2, 1/2]")
    kd = float([kernel.eval, kernel.deriv1, kernel.deriv2][k](np.array([0.0]))[0])
    if kd <= 0:
        raise ValidationError("kernel needs a positive derivative of order k at zero")
    f0 = float(design.density(np.array([x0]))[0])
    h = (L * n * J * f0) ** (-1.0 / (s + 1.0))
    if not (h / 2 <= x0 <= 1 - h / 2):
        raise ValidationError("bump does not fit inside [0, 1]; increase n")
    theta1 = zero_function(c_theta=L)
    theta2 = bump(kernel, L, s, h, x0)
    sep = abs(float([theta2.eval, theta2.deriv1, theta2.deriv2][k](np.array([x0]))[0]))
    formula = kd * L ** ((k + 1.0) / (s + 1.0)) * (n * J * f0) ** (-(s - k) / (s + 1.0))
    h2 = hellinger_boundary_closed_form(theta1, theta2, n, J, design).value
    return LowerBoundPair(theta1, theta2, sep, math.sqrt(h2), h, formula)


def search_n0(s, L, k, J, design=None, x0=0.5, kernel=None, ns=None):
    """Smallest grid ``n`` from which ``H <= 1`` holds for all larger grid values."""
    ns = [int(round(10 ** e)) for e in np.arange(1.0, 7.01, 0.25)] if ns is None else list(ns)
    ok = []
    for n in ns:
        try:
            ok.append(lower_bound_pair(s, L, k, n, J, design, x0, kernel).hellinger <= 1.0)
        except ValidationError:
            ok.append(False)
    for i in range(len(ns)):
        if all(ok[i:]):
            return ns[i]
    return None


# ---------------------------------------------------------------------------
# Counterexample for regularity one
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleResult:
    empirical_power: float
    theory_power: float
    null_power: float
    standard_error: float
    reps: int

    def to_dict(self):
        return {"empirical_power": self.empirical_power, "theory_power": self.theory_power,
                "null_power": self.null_power, "standard_error": self.standard_error,
                "reps": self.reps}


def _test_region_mass(theta, spec):
    """Mean number of points of ``(X1, X2)`` on the wrong side of zero."""
    n = spec.n
    pts = sorted(p for p in theta.breakpoints if 0 < p < 1)

    def f(x):
        t = theta.eval(x)
        dens = spec.design.density(x)
        return n * dens * (spec.error.jump_right * np.maximum(t, 0.0)
                           + spec.error.jump_left * np.maximum(-t, 0.0))

    val, _ = integrate_1d(f, 0.0, 1.0, pts)
    return val


def counterexample_theory(C, n, error=None):
    """Exact rejection probability of the zero-crossing test under ``f_n``.

    With equidistant design the positive part of ``f_n`` integrates to
    ``ceil((n-1)/2) * 2C / (pi^2 (n-1)^2)`` and the negative part to the
    same expression with ``floor``.
    """
    err = quadratic_jump_error() if error is None else error
    half = 2.0 * C / (math.pi**2 * (n - 1) ** 2)
    pos, neg = math.ceil((n - 1) / 2), (n - 1) // 2
    expo = n * half * (err.jump_right * pos + err.jump_left * neg)
    return 1.0 - math.exp(-expo)


def counterexample_power(C, n, reps, seed, error=None):
    """Power of ``T_n = 1{X1 has a point above 0 or X2 a point below 0}``.

    Simulates the boundary experiment under ``f_n`` on the equidistant
    design. The default error law has unit jumps at both endpoints, which
    is what the closed form ``1 - exp(-2 C n / (pi^2 (n-1)))`` presumes.

    Returns
    -------
    CounterexampleResult
        ``null_power`` is computed from the test-region masses under
        ``theta = 0`` (exactly zero), not by simulation.
    """
    if reps < 1000:
        raise ValidationError("counterexample needs reps >= 1000")
    if n < 2 or C <= 0:
        raise ValidationError("need n >= 2 and C > 0")
    err = quadratic_jump_error() if error is None else error
    spec = ExperimentSpec(int(n), uniform_design(), err, c_theta=1.0)
    fn = oscillating_sine(C, n, c_theta=1.0)
    lam1, lam2 = boundary_intensities(fn, spec)
    _ = lam1.mass, lam2.mass
    hits = 0
    for r in range(reps):
        x1 = sample_ppp(lam1, derive_seed(seed, "ce-X1", r), "X1_lower_region")
        x2 = sample_ppp(lam2, derive_seed(seed, "ce-X2", r), "X2_upper_region")
        hits += bool(np.any(x1.y > 0) or np.any(x2.y < 0))
    p = hits / reps
    null = 1.0 - math.exp(-_test_region_mass(zero_function(1.0), spec))
    return CounterexampleResult(p, counterexample_theory(C, n, err), null,
                                math.sqrt(max(p * (1 - p), 1e-300) / reps), int(reps))
