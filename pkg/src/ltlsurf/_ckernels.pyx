# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels; see _pykernels for the reference semantics.

Full-rank blocks are solved by Householder QR of the transposed configuration
matrix (pinv(M) = Q R^-T). Blocks that are short, singular or worse
conditioned than 1e10 are flagged and left to the SVD path in Python.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

FIRST_ORDER = 0
MONOMIAL = 1

cdef double[11] FACT = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0, 3628800.0]


def n_rows(int kind, int degree):
    if kind == FIRST_ORDER:
        return 5
    return (degree + 1) * (degree + 2) // 2 - 1


cdef inline double ipow(double x, int p) nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(p):
        r *= x
    return r


cdef void fill(double[:, ::1] A, const double[:] xs, const double[:] ys,
               Py_ssize_t start, Py_ssize_t n, int kind, int degree) nogil:
    cdef Py_ssize_t i
    cdef int d, mm, r
    cdef double x, y
    for i in range(n):
        x = xs[start + i]
        y = ys[start + i]
        if kind == 0:
            A[i, 0] = x
            A[i, 1] = y
            A[i, 2] = x * y
            A[i, 3] = x * x - y * y
            A[i, 4] = 1.0
        else:
            r = 0
            for d in range(1, degree + 1):
                for mm in range(d + 1):
                    A[i, r] = ipow(x, d - mm) * ipow(y, mm) / (FACT[d - mm] * FACT[mm])
                    r += 1


cdef int qr_pinv(double[:, ::1] A, double[:, ::1] V, double[:, ::1] R,
                 double[:, ::1] Rinv, double[:, ::1] B, double[::1] vn,
                 Py_ssize_t n, int m, double maxcond) nogil:
    """Householder QR of A (n x m) then B = Q [R^-T; 0]. Returns 1 if flagged."""
    cdef int c, j, k
    cdef Py_ssize_t i
    cdef double norm, alpha, s, vv, fro_r, fro_i
    for c in range(m):
        norm = 0.0
        for i in range(c, n):
            norm += A[i, c] * A[i, c]
        norm = sqrt(norm)
        if norm == 0.0:
            return 1
        alpha = -norm if A[c, c] >= 0 else norm
        vv = 0.0
        for i in range(c, n):
            V[i, c] = A[i, c]
        V[c, c] -= alpha
        for i in range(c, n):
            vv += V[i, c] * V[i, c]
        vn[c] = vv
        if vv == 0.0:
            return 1
        for j in range(c, m):
            s = 0.0
            for i in range(c, n):
                s += V[i, c] * A[i, j]
            s = 2.0 * s / vv
            for i in range(c, n):
                A[i, j] -= s * V[i, c]
        for j in range(m):
            R[c, j] = A[c, j] if j >= c else 0.0
    # R^-1 by back substitution, column by column
    for j in range(m):
        for i in range(m):
            Rinv[i, j] = 0.0
    for j in range(m):
        Rinv[j, j] = 1.0 / R[j, j]
        for k in range(j - 1, -1, -1):
            s = 0.0
            for i in range(k + 1, j + 1):
                s += R[k, i] * Rinv[i, j]
            Rinv[k, j] = -s / R[k, k]
    fro_r = 0.0
    fro_i = 0.0
    for i in range(m):
        for j in range(m):
            fro_r += R[i, j] * R[i, j]
            fro_i += Rinv[i, j] * Rinv[i, j]
    if sqrt(fro_r) * sqrt(fro_i) > maxcond:
        return 1
    for i in range(n):
        for j in range(m):
            B[i, j] = Rinv[j, i] if i < m else 0.0
    for c in range(m - 1, -1, -1):
        for j in range(m):
            s = 0.0
            for i in range(c, n):
                s += V[i, c] * B[i, j]
            s = 2.0 * s / vn[c]
            for i in range(c, n):
                B[i, j] -= s * V[i, c]
    return 0


def config_pinv(indptr, xs, ys, int kind, int degree, double rcond=1e-12):
    cdef const cnp.int64_t[:] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const double[:] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[:] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t nb = ptr.shape[0] - 1
    cdef int m = n_rows(kind, degree)
    cdef Py_ssize_t total = ptr[nb] if nb >= 0 else 0
    out_arr = np.zeros((total, m))
    flags_arr = np.zeros(nb, dtype=np.int8)
    cdef double[:, ::1] out = out_arr
    cdef cnp.int8_t[:] flags = flags_arr
    cdef Py_ssize_t maxn = 0, b, n, i, start
    cdef int j
    for b in range(nb):
        if ptr[b + 1] - ptr[b] > maxn:
            maxn = ptr[b + 1] - ptr[b]
    maxn = max(maxn, m)
    cdef double[:, ::1] A = np.zeros((maxn, m))
    cdef double[:, ::1] V = np.zeros((maxn, m))
    cdef double[:, ::1] B = np.zeros((maxn, m))
    cdef double[:, ::1] R = np.zeros((m, m))
    cdef double[:, ::1] Rinv = np.zeros((m, m))
    cdef double[::1] vn = np.zeros(m)
    cdef double maxcond = 1e10
    with nogil:
        for b in range(nb):
            start = ptr[b]
            n = ptr[b + 1] - start
            if n < m:
                flags[b] = 1
                continue
            fill(A, X, Y, start, n, kind, degree)
            if qr_pinv(A, V, R, Rinv, B, vn, n, m, maxcond):
                flags[b] = 1
                continue
            for i in range(n):
                for j in range(m):
                    out[start + i, j] = B[i, j]
    return out_arr, flags_arr
