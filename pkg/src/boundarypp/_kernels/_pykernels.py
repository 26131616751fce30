"""NumPy implementations of the hot loops.

These mirror ``_ckernels.pyx`` operation for operation and serve as the
fallback when the compiled module is unavailable.
"""
import numpy as np

OPTIMAL = 0
SINGULAR = 1
UNBOUNDED = 2
MAXITER = 3


def _column(u, s):
    return np.array([s, s * u, s * (0.5 * u * u), 1.0])


def minimax_fit(u, y, sigma, basis, max_iter=500, tol=1e-12):
    """Discrete one-sided Chebyshev fit by the exchange (dual simplex) method.

    Solves ``min t`` subject to ``sigma_i * (y_i - p(u_i)) <= t`` with
    ``p(u) = b0 + b1*u + b2*u**2/2``.

    Parameters
    ----------
    u, y, sigma : ndarray
        Abscissae, ordinates and constraint signs (+1 or -1).
    basis : sequence of int
        Four constraint indices forming a dual-feasible starting reference.
    max_iter : int
        Exchange step budget.
    tol : float
        Relative optimality tolerance on the reduced costs.

    Returns
    -------
    tuple
        ``(b0, b1, b2, t, iterations, status)``.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    B = np.array(basis, dtype=np.intp)
    half_u2 = 0.5 * u * u
    cost = sigma * y
    e4 = np.array([0.0, 0.0, 0.0, 1.0])
    thresh = tol * (1.0 + float(np.max(np.abs(y)))) if y.size else tol
    z = np.full(4, np.nan)
    for it in range(max_iter):
        M = np.column_stack([_column(u[i], sigma[i]) for i in B])
        try:
            w = np.linalg.solve(M, e4)
            z = np.linalg.solve(M.T, cost[B])
        except np.linalg.LinAlgError:
            return (np.nan, np.nan, np.nan, np.nan, it, SINGULAR)
        d = sigma * (y - (z[0] + z[1] * u + z[2] * half_u2)) - z[3]
        j = int(np.argmax(d))
        if d[j] <= thresh:
            return (z[0], z[1], z[2], z[3], it, OPTIMAL)
        delta = np.linalg.solve(M, _column(u[j], sigma[j]))
        pos = delta > 1e-14
        if not pos.any():
            return (z[0], z[1], z[2], z[3], it, UNBOUNDED)
        ratios = np.where(pos, np.maximum(w, 0.0) / np.where(pos, delta, 1.0), np.inf)
        B[int(np.argmin(ratios))] = j
    return (z[0], z[1], z[2], z[3], max_iter, MAXITER)


def block_extrema(index, values, m):
    """Per-block minimum, maximum and count.

    Empty blocks report ``+inf`` / ``-inf`` and a zero count.
    """
    index = np.asarray(index, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    mins = np.full(m, np.inf)
    maxs = np.full(m, -np.inf)
    if index.size:
        np.minimum.at(mins, index, values)
        np.maximum.at(maxs, index, values)
    counts = np.bincount(index, minlength=m).astype(np.int64)
    return mins, maxs, counts
