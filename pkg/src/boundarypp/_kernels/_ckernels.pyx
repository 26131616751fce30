# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the exchange-method minimax fit and block extrema."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

DEF OPTIMAL = 0
DEF SINGULAR = 1
DEF UNBOUNDED = 2
DEF MAXITER = 3


cdef int _solve4(double A[4][4], double b[4], double out[4]) noexcept nogil:
    # Gaussian elimination with partial pivoting on a copy.
    cdef double M[4][5]
    cdef int i, j, k, p
    cdef double best, f, tmp
    for i in range(4):
        for j in range(4):
            M[i][j] = A[i][j]
        M[i][4] = b[i]
    for k in range(4):
        p = k
        best = fabs(M[k][k])
        for i in range(k + 1, 4):
            if fabs(M[i][k]) > best:
                best = fabs(M[i][k])
                p = i
        if best < 1e-300:
            return 1
        if p != k:
            for j in range(5):
                tmp = M[k][j]
                M[k][j] = M[p][j]
                M[p][j] = tmp
        for i in range(k + 1, 4):
            f = M[i][k] / M[k][k]
            for j in range(k, 5):
                M[i][j] -= f * M[k][j]
    for i in range(3, -1, -1):
        tmp = M[i][4]
        for j in range(i + 1, 4):
            tmp -= M[i][j] * out[j]
        out[i] = tmp / M[i][i]
    return 0


def minimax_fit(u, y, sigma, basis, int max_iter=500, double tol=1e-12):
    """Discrete one-sided Chebyshev fit by the exchange (dual simplex) method.

    See ``_pykernels.minimax_fit`` for the contract.
    """
    cdef const double[::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] S = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t B[4]
    cdef double M[4][4]
    cdef double MT[4][4]
    cdef double e4[4]
    cdef double cb[4]
    cdef double w[4]
    cdef double z[4]
    cdef double col[4]
    cdef double delta[4]
    cdef double d, best, thresh, ymax, r, rbest, s, ui
    cdef Py_ssize_t i, j, jbest
    cdef int it, r_idx, k, status = MAXITER
    for k in range(4):
        B[k] = basis[k]
        z[k] = float("nan")
    e4[0] = 0.0; e4[1] = 0.0; e4[2] = 0.0; e4[3] = 1.0
    ymax = 0.0
    for i in range(n):
        if fabs(Y[i]) > ymax:
            ymax = fabs(Y[i])
    thresh = tol * (1.0 + ymax)
    with nogil:
        for it in range(max_iter):
            for k in range(4):
                i = B[k]
                s = S[i]
                ui = U[i]
                M[0][k] = s
                M[1][k] = s * ui
                M[2][k] = s * (0.5 * ui * ui)
                M[3][k] = 1.0
                cb[k] = s * Y[i]
            for k in range(4):
                for j in range(4):
                    MT[k][j] = M[j][k]
            if _solve4(M, e4, w) or _solve4(MT, cb, z):
                status = SINGULAR
                break
            best = -INFINITY
            jbest = 0
            for i in range(n):
                ui = U[i]
                d = S[i] * (Y[i] - (z[0] + z[1] * ui + z[2] * (0.5 * ui * ui))) - z[3]
                if d > best:
                    best = d
                    jbest = i
            if best <= thresh:
                status = OPTIMAL
                break
            s = S[jbest]
            ui = U[jbest]
            col[0] = s
            col[1] = s * ui
            col[2] = s * (0.5 * ui * ui)
            col[3] = 1.0
            if _solve4(M, col, delta):
                status = SINGULAR
                break
            r_idx = -1
            rbest = INFINITY
            for k in range(4):
                if delta[k] > 1e-14:
                    r = (w[k] if w[k] > 0.0 else 0.0) / delta[k]
                    if r < rbest:
                        rbest = r
                        r_idx = k
            if r_idx < 0:
                status = UNBOUNDED
                break
            B[r_idx] = jbest
        else:
            it = max_iter
    return (z[0], z[1], z[2], z[3], it, status)


def block_extrema(index, values, Py_ssize_t m):
    """Per-block minimum, maximum and count (empty blocks give +inf/-inf/0)."""
    cdef const cnp.int64_t[::1] idx = np.ascontiguousarray(index, dtype=np.int64)
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    mins_arr = np.full(m, np.inf)
    maxs_arr = np.full(m, -np.inf)
    counts_arr = np.zeros(m, dtype=np.int64)
    cdef double[::1] mins = mins_arr
    cdef double[::1] maxs = maxs_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t i, k, n = idx.shape[0]
    cdef double x
    if v.shape[0] != n:
        raise ValueError("index and values differ in length")
    for i in range(n):
        k = idx[i]
        if k < 0 or k >= m:
            raise IndexError("block index out of range")
        x = v[i]
        if x < mins[k]:
            mins[k] = x
        if x > maxs[k]:
            maxs[k] = x
        counts[k] += 1
    return mins_arr, maxs_arr, counts_arr
