"""Command-line runner writing CSV/JSON artifacts plus a manifest per run."""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .equivalence import forward_transform, thin_ppp
from .errors import NumericalError, ValidationError
from .estimators import pilot_estimate
from .metrics import (block_extreme_hellinger, counterexample_power, extreme_law_check,
                      hellinger_boundary_closed_form, hellinger_ppp, lower_bound_pair,
                      loglog_slope, rate_study, search_n0, step_realizations)
from .model import (ExperimentSpec, make_design, make_error, make_parameter, step_function)
from .rng import derive_seed, make_rng
from .samplers import (PointProcessRealization, RegressionSample, boundary_intensities,
                       sample_boundary_pair, sample_regression)

OUTPUT_ENV = "BOUNDARYPP_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

DEFAULTS = {
    "seed": 0,
    "format": "csv",
    "experiment": {"n": 100, "c_theta": 1.0, "alpha": 1.0},
    "design": {"family": "uniform"},
    "error": {"family": "uniform"},
    "theta": {"family": "polynomial", "coeffs": [0.0]},
    "theta2": {"family": "polynomial", "coeffs": [0.0]},
    "run": {},
}

# flag name -> (section, key); section None means top level
FLAG_MAP = {
    "seed": (None, "seed"), "format": (None, "format"),
    "n": ("experiment", "n"), "c_theta": ("experiment", "c_theta"),
    "alpha": ("experiment", "alpha"),
    "design": ("design", "family"), "error": ("error", "family"),
    "theta": ("theta", "family"), "theta2": ("theta2", "family"),
}
RUN_KEYS = ("m", "h_const", "reps", "ns", "experiment_kind", "scale", "l", "delta0", "s", "L",
            "k", "J", "C", "p", "input", "x1", "x2", "x0", "workers")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def resolve_config(args):
    """Defaults, then the config file, then explicit flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        loaded = io.load_config(args.config)
        for section in ("theta", "theta2", "design", "error"):
            # a family named in the file brings its own parameters
            if isinstance(loaded.get(section), dict) and "family" in loaded[section]:
                cfg[section] = {}
        cfg = _merge(cfg, loaded)
    # a new family on the command line drops the file's parameters for that section
    for flag, (section, key) in FLAG_MAP.items():
        val = getattr(args, flag, None)
        if val is None:
            continue
        if section is None:
            cfg[key] = val
        elif key == "family" and cfg[section].get("family") != val:
            cfg[section] = {"family": val}
        else:
            cfg[section][key] = val
    for section in ("theta", "theta2", "design", "error"):
        extra = getattr(args, f"{section}_params", None)
        if extra:
            try:
                cfg[section].update(json.loads(extra))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"--{section}-params is not JSON: {exc}") from None
    for key in RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg["run"][key] = val
    if cfg["format"] not in ("csv", "json"):
        raise ValidationError("format must be csv or json")
    return cfg


def build_spec(cfg):
    exp = cfg["experiment"]
    try:
        n, c, a = int(exp["n"]), float(exp["c_theta"]), float(exp["alpha"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"invalid experiment section: {exc}") from None
    design = make_design(**cfg["design"])
    error = make_error(**cfg["error"])
    return ExperimentSpec(n, design, error, c, a)


def build_theta(cfg, section="theta"):
    params = dict(cfg[section])
    family = params.pop("family")
    params.setdefault("alpha", cfg["experiment"]["alpha"])
    if family != "figure1":
        params.setdefault("c_theta", cfg["experiment"]["c_theta"])
    return make_parameter(family, **params)


def _run_param(cfg, key, default=None, cast=float, required=False):
    val = cfg["run"].get(key, default)
    if val is None:
        if required:
            raise ValidationError(f"missing required option {key}")
        return None
    try:
        return cast(val)
    except (TypeError, ValueError):
        raise ValidationError(f"option {key} has invalid value {val!r}") from None


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------


def _write_sample(obj, out, stem, fmt):
    if fmt == "csv":
        return [obj.to_csv(out / f"{stem}.csv")]
    if isinstance(obj, RegressionSample):
        payload = {"kind": "regression", "n": obj.n, "seed": obj.seed, "spec": obj.spec_ref,
                   "j": obj.index, "x": obj.xs, "y": obj.ys}
    else:
        payload = {"kind": "ppp", "tag": obj.process_tag, "seed": obj.seed, "scale": obj.scale,
                   "spec": obj.spec_ref, "x": obj.x, "y": obj.y,
                   "marks": {k: v for k, v in sorted(obj.marks.items())}}
    return [io.write_json(out / f"{stem}.json", payload)]


def _read_sample(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    header, columns, _ = io.read_csv(path)
    if columns[:3] == ["j", "x", "y"]:
        return RegressionSample.from_csv(path)
    return PointProcessRealization.from_csv(path)


# ---------------------------------------------------------------------------
# subcommands; each returns a list of written paths
# ---------------------------------------------------------------------------


def cmd_sample_regression(cfg, out):
    spec, theta = build_spec(cfg), build_theta(cfg)
    sample = sample_regression(theta, spec, cfg["seed"])
    return _write_sample(sample, out, "sample", cfg["format"])


def cmd_sample_ppp(cfg, out):
    spec, theta = build_spec(cfg), build_theta(cfg)
    scale = _run_param(cfg, "scale")
    x1, x2 = sample_boundary_pair(theta, spec, cfg["seed"], scale=scale)
    return _write_sample(x1, out, "X1", cfg["format"]) + _write_sample(x2, out, "X2", cfg["format"])


def cmd_transform(cfg, out):
    # design and error only: the curve is never read here
    spec = build_spec(cfg)
    sample = _read_sample(_run_param(cfg, "input", cast=str, required=True))
    if not isinstance(sample, RegressionSample):
        raise ValidationError("transform needs a regression sample")
    spec = spec.with_n(len(sample))
    m = _run_param(cfg, "m", cast=int)
    x1, x2, info = forward_transform(sample, spec, cfg["seed"], m=m,
                                     bandwidth_const=_run_param(cfg, "h_const", 1.0),
                                     return_info=True)
    paths = _write_sample(x1, out, "X1", cfg["format"]) + _write_sample(x2, out, "X2", cfg["format"])
    return paths + [io.write_json(out / "transform.json", info.to_dict())]


def cmd_estimate(cfg, out):
    spec = build_spec(cfg)
    h_const = _run_param(cfg, "h_const", 1.0)
    src = cfg["run"].get("input")
    if src:
        data = _read_sample(src)
        if not isinstance(data, RegressionSample):
            raise ValidationError("--input must be a regression sample; use --x1/--x2 for processes")
    else:
        x1 = cfg["run"].get("x1")
        x2 = cfg["run"].get("x2")
        if not (x1 or x2):
            raise ValidationError("estimate needs --input or --x1/--x2")
        data = (_read_sample(x1) if x1 else None, _read_sample(x2) if x2 else None)
    m = _run_param(cfg, "m", cast=int)
    grid = None if m is None else (np.arange(m) + 0.5) / m
    pilot = pilot_estimate(data, spec, h_const, grid)
    return [pilot.to_csv(out / "pilot.csv")]


def cmd_hellinger(cfg, out):
    spec = build_spec(cfg)
    t1, t2 = build_theta(cfg, "theta"), build_theta(cfg, "theta2")
    closed = hellinger_boundary_closed_form(t1, t2, spec.n, spec.error.J, spec.design)
    quad = hellinger_ppp(boundary_intensities(t1, spec), boundary_intensities(t2, spec))
    res = {"closed_form": closed.to_dict(), "quadrature": quad.to_dict(),
           "difference": abs(closed.value - quad.value)}
    return [io.write_json(out / "hellinger.json", res)]


def _step_theta(cfg, m):
    if cfg["theta"].get("family") == "step":
        return build_theta(cfg)
    c = float(cfg["experiment"]["c_theta"])
    rng = make_rng(derive_seed(cfg["seed"], "step-values"))
    return step_function(rng.uniform(-0.5 * c, 0.5 * c, m).tolist(), c)


def cmd_extreme_check(cfg, out):
    spec = build_spec(cfg)
    reps = _run_param(cfg, "reps", 100, int)
    m = _run_param(cfg, "m", 100, int)
    theta = _step_theta(cfg, m)
    if len(theta.params["values"]) != m:
        raise ValidationError("step values must have m entries")
    reals = step_realizations(theta, spec, m, reps, cfg["seed"])
    rep = extreme_law_check(reals, theta, m, spec, seed=cfg["seed"])
    return [io.write_json(out / "extreme_check.json", rep.to_dict())]


def cmd_block_hellinger(cfg, out):
    ls = cfg["run"].get("l") or [50, 200, 800]
    ls = [int(v) for v in (ls if isinstance(ls, list) else [ls])]
    delta0 = _run_param(cfg, "delta0", 0.0)
    err = make_error(**cfg["error"])
    rows = []
    for l in ls:
        h2, e = block_extreme_hellinger(l, err, delta0, return_error=True)
        rows.append((l, h2, e))
    paths = []
    res = {"rows": [{"l": l, "hellinger_sq": h, "error_estimate": e} for l, h, e in rows]}
    if len(rows) >= 2:
        res["slope"] = loglog_slope([r[0] for r in rows], [r[1] for r in rows])[0]
    if cfg["format"] == "csv":
        paths.append(io.write_csv(out / "block_hellinger.csv", {"delta0": io.fmt(delta0)},
                                  ["l", "hellinger_sq", "error_estimate"], rows))
    paths.append(io.write_json(out / "block_hellinger.json", res))
    return paths


def cmd_rate_study(cfg, out):
    spec, theta = build_spec(cfg), build_theta(cfg)
    ns = cfg["run"].get("ns") or [500, 2000, 8000]
    ns = [int(v) for v in ns]
    reps = _run_param(cfg, "reps", 200, int)
    kind = cfg["run"].get("experiment_kind", "regression")
    est = {"bandwidth_const": _run_param(cfg, "h_const", 1.0)}
    res = rate_study(est, theta, spec, ns, reps, cfg["seed"], kind,
                     x0=_run_param(cfg, "x0", 0.5),
                     workers=_run_param(cfg, "workers", None, int))
    rows = [(k, n, r, s) for k, v in res.items() for n, r, s in v.to_rows()]
    paths = [io.write_json(out / "rate_study.json", {k: v.to_dict() for k, v in res.items()})]
    if cfg["format"] == "csv":
        paths.append(io.write_csv(out / "rate_study.csv", {"experiment": kind},
                                  ["target", "n", "risk", "risk_se"], rows))
    return paths


def cmd_lower_bound(cfg, out):
    design = make_design(**cfg["design"])
    s = _run_param(cfg, "s", 2.0)
    L = _run_param(cfg, "L", 1.0)
    k = _run_param(cfg, "k", 0, int)
    J = _run_param(cfg, "J", 1.0)
    x0 = _run_param(cfg, "x0", 0.5)
    n = int(cfg["experiment"]["n"])
    pair = lower_bound_pair(s, L, k, n, J, design, x0)
    res = {"s": s, "L": L, "k": k, "J": J, "n": n, "x0": x0, "h": pair.h,
           "separation": pair.separation, "separation_formula": pair.separation_formula,
           "hellinger": pair.hellinger, "n0": search_n0(s, L, k, J, design, x0)}
    return [io.write_json(out / "lower_bound.json", res)]


def cmd_counterexample(cfg, out):
    C = _run_param(cfg, "C", 1.0)
    n = int(cfg["experiment"]["n"])
    reps = _run_param(cfg, "reps", 10_000, int)
    res = counterexample_power(C, n, reps, cfg["seed"])
    return [io.write_json(out / "counterexample.json", {"C": C, "n": n, **res.to_dict()})]


def cmd_thin(cfg, out):
    real = _read_sample(_run_param(cfg, "input", cast=str, required=True))
    if not isinstance(real, PointProcessRealization):
        raise ValidationError("thin needs a point process file")
    p = _run_param(cfg, "p", 0.5)
    kept, rest = thin_ppp(real, p, cfg["seed"])
    return (_write_sample(kept, out, "thinned_kept", cfg["format"])
            + _write_sample(rest, out, "thinned_rest", cfg["format"]))


COMMANDS = {
    "sample-regression": cmd_sample_regression,
    "sample-ppp": cmd_sample_ppp,
    "transform": cmd_transform,
    "estimate": cmd_estimate,
    "hellinger": cmd_hellinger,
    "extreme-check": cmd_extreme_check,
    "block-hellinger": cmd_block_hellinger,
    "rate-study": cmd_rate_study,
    "lower-bound": cmd_lower_bound,
    "counterexample": cmd_counterexample,
    "thin": cmd_thin,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _input_hashes(cfg):
    out = {}
    for key in ("input", "x1", "x2"):
        p = cfg["run"].get(key)
        if p and Path(p).exists():
            out[key] = io.file_hash(p)
    return out


def run(subcommand, cfg, output_dir):
    """Execute one subcommand and write its manifest; returns the manifest dict."""
    if subcommand not in COMMANDS:
        raise ValidationError(f"unknown subcommand {subcommand!r}")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = COMMANDS[subcommand](cfg, out)
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "inputs": _input_hashes(cfg),
        "outputs": {Path(p).name: io.file_hash(p) for p in paths},
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest


def replay(manifest_path, output_dir):
    """Re-run a manifest and verify that every output hash matches."""
    try:
        manifest = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read manifest: {exc}") from None
    for key, digest in manifest.get("inputs", {}).items():
        if io.file_hash(manifest["config"]["run"][key]) != digest:
            raise ValidationError(f"input {key} changed since the manifest was written")
    fresh = run(manifest["subcommand"], manifest["config"], output_dir)
    if fresh["outputs"] != manifest["outputs"]:
        raise NumericalError("replayed outputs differ from the manifest")
    return fresh


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _parser():
    p = _Parser(prog="boundarypp", description=__doc__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or .)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--n", type=int)
        sp.add_argument("--c-theta", dest="c_theta", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--design")
        sp.add_argument("--design-params", dest="design_params", help="JSON object")
        sp.add_argument("--error")
        sp.add_argument("--error-params", dest="error_params", help="JSON object")
        sp.add_argument("--theta", help="parameter family")
        sp.add_argument("--theta-params", dest="theta_params", help="JSON object")
        sp.add_argument("--theta2", help="second parameter family (hellinger)")
        sp.add_argument("--theta2-params", dest="theta2_params", help="JSON object")
        sp.add_argument("--m", type=int, help="block count")
        sp.add_argument("--h-const", dest="h_const", type=float, help="bandwidth constant")
        sp.add_argument("--reps", type=int)
        sp.add_argument("--ns", type=int, nargs="+")
        sp.add_argument("--experiment", dest="experiment_kind", choices=("regression", "ppp"))
        sp.add_argument("--scale", type=float)
        sp.add_argument("--l", type=int, nargs="+", help="block sizes")
        sp.add_argument("--delta0", type=float)
        sp.add_argument("--s", type=float)
        sp.add_argument("--L", type=float)
        sp.add_argument("--k", type=int)
        sp.add_argument("--J", type=float)
        sp.add_argument("--C", type=float)
        sp.add_argument("--p", type=float)
        sp.add_argument("--x0", type=float)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--input")
        sp.add_argument("--x1")
        sp.add_argument("--x2")

    for name in COMMANDS:
        common(sub.add_parser(name))
    rp = sub.add_parser("replay", help="re-run a manifest and check its hashes")
    rp.add_argument("manifest")
    rp.add_argument("--output-dir")
    return p


def _fail(code, exc):
    err = {"error": type(exc).__name__, "message": str(exc)}
    residual = getattr(exc, "residual", None)
    if residual is not None and math.isfinite(residual):
        err["residual"] = residual
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc)
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or "."
    try:
        if args.subcommand == "replay":
            manifest = replay(args.manifest, out)
        else:
            manifest = run(args.subcommand, resolve_config(args), out)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    for name, digest in sorted(manifest["outputs"].items()):
        print(f"{name} {digest[:16]}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
