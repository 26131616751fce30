"""Compare the compiled kernels against the NumPy fallback.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Prints a
table of median wall times and the speedup, and checks that both
backends return the same answers on every input.
"""
import argparse
import statistics
import time

import numpy as np

from boundarypp._kernels import _pykernels
from boundarypp.estimators import _initial_reference

try:
    from boundarypp._kernels import _ckernels
except ImportError:
    _ckernels = None


def _fit_problem(npts, seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1, 1, npts)
    sigma = np.where(rng.random(npts) < 0.5, 1.0, -1.0)
    y = 0.3 + 0.2 * v - 0.4 * v * v + sigma * rng.uniform(-1, 0, npts)
    return v, y, sigma, _initial_reference(v, sigma)


def _extrema_problem(npts, m, seed):
    rng = np.random.default_rng(seed)
    return rng.integers(0, m, npts).astype(np.int64), rng.normal(size=npts), m


def _time(fn, args, repeat):
    out, times = None, []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def _same(a, b):
    return all(np.allclose(x, y, rtol=1e-10, atol=1e-12, equal_nan=True) for x, y in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the fallback is available")
        return 1
    cases = [(f"minimax_fit n={n}", "minimax_fit", _fit_problem(n, n)) for n in (200, 2000, 20000)]
    cases += [(f"block_extrema n={n} m={m}", "block_extrema", _extrema_problem(n, m, n))
              for n, m in ((10_000, 100), (1_000_000, 1000))]
    print(f"{'case':32s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>8s}  agree")
    for label, name, problem in cases:
        tp, op = _time(getattr(_pykernels, name), problem, args.repeat)
        tc, oc = _time(getattr(_ckernels, name), problem, args.repeat)
        print(f"{label:32s} {tp:12.3e} {tc:12.3e} {tp / tc:8.1f}  {_same(op, oc)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
