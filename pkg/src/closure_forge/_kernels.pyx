# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the oracle and cut-coefficient kernels.

Mirrors ``_kernels_py`` function for function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, INFINITY

cnp.import_array()


def gmic_coefficients(alpha, double beta, int_mask, double drop_tol):
    cdef const double[::1] a = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef const cnp.npy_bool[::1] mask = np.ascontiguousarray(int_mask, dtype=np.bool_)
    cdef Py_ssize_t n = a.shape[0], j
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double f0 = beta - floor(beta)
    cdef double fa, v
    for j in range(n):
        if mask[j]:
            fa = a[j] - floor(a[j])
            if fa <= f0:
                v = fa / f0
            else:
                v = (1.0 - fa) / (1.0 - f0)
        else:
            if a[j] >= 0:
                v = a[j] / f0
            else:
                v = -a[j] / (1.0 - f0)
        if fabs(v) < drop_tol:
            v = 0.0
        out[j] = v
    return out_arr


def integer_grid(lo, hi):
    cdef const cnp.int64_t[::1] l = np.ascontiguousarray(lo, dtype=np.int64)
    cdef const cnp.int64_t[::1] h = np.ascontiguousarray(hi, dtype=np.int64)
    cdef Py_ssize_t k = l.shape[0], i, j, p = 1
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    for j in range(k):
        if h[j] < l[j]:
            return np.zeros((0, k), dtype=np.int64)
        p *= h[j] - l[j] + 1
    out_arr = np.empty((p, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef cnp.int64_t[::1] cur = np.array(l, dtype=np.int64)
    for i in range(p):
        for j in range(k):
            out[i, j] = cur[j]
        # odometer, last coordinate fastest (matches meshgrid ij ordering)
        j = k - 1
        while j >= 0:
            cur[j] += 1
            if cur[j] <= h[j]:
                break
            cur[j] = l[j]
            j -= 1
    return out_arr


def slice_min(points, AJ, b, null_proj, vert_proj, vert_cols, costs_J, costs_C, double tol):
    cdef const cnp.int64_t[:, ::1] X = np.ascontiguousarray(points, dtype=np.int64)
    cdef const double[:, ::1] A = np.ascontiguousarray(AJ, dtype=np.float64)
    cdef const double[::1] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] N = np.ascontiguousarray(null_proj, dtype=np.float64)
    cdef const double[:, :, ::1] P = np.ascontiguousarray(vert_proj, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] VC = np.ascontiguousarray(vert_cols, dtype=np.int64)
    cdef const double[:, ::1] CJ = np.ascontiguousarray(costs_J, dtype=np.float64)
    cdef const double[:, ::1] CC = np.ascontiguousarray(costs_C, dtype=np.float64)
    cdef Py_ssize_t p = X.shape[0], k = A.shape[1], m = A.shape[0]
    cdef Py_ssize_t V = P.shape[0], s = P.shape[1], q = CJ.shape[0]
    cdef Py_ssize_t i, j, r, v, t, c
    feasible_arr = np.zeros(p, dtype=np.bool_)
    best_arr = np.full((q, p), np.inf)
    arg_arr = np.full((q, p), -1, dtype=np.int64)
    cdef cnp.npy_bool[::1] feasible = feasible_arr
    cdef double[:, ::1] best = best_arr
    cdef cnp.int64_t[:, ::1] arg = arg_arr
    cdef double[::1] R = np.empty(m)
    cdef double[::1] Y = np.empty(max(s, 1))
    cdef double[::1] base = np.empty(max(q, 1))
    cdef double acc, scale, rmax, val
    cdef bint ok
    for i in range(p):
        rmax = 0.0
        for r in range(m):
            acc = bb[r]
            for j in range(k):
                acc -= A[r, j] * X[i, j]
            R[r] = acc
            if fabs(acc) > rmax:
                rmax = fabs(acc)
        scale = tol * (1.0 + rmax)
        ok = True
        for r in range(m):
            acc = 0.0
            for t in range(m):
                acc += N[r, t] * R[t]
            if fabs(acc) > scale:
                ok = False
                break
        if not ok:
            continue
        for c in range(q):
            acc = 0.0
            for j in range(k):
                acc += CJ[c, j] * X[i, j]
            base[c] = acc
        for v in range(V):
            ok = True
            for t in range(s):
                acc = 0.0
                for r in range(m):
                    acc += P[v, t, r] * R[r]
                if acc < -scale:
                    ok = False
                    break
                Y[t] = acc
            if not ok:
                continue
            feasible[i] = True
            for c in range(q):
                val = base[c]
                for t in range(s):
                    val += CC[c, VC[v, t]] * Y[t]
                if val < best[c, i]:
                    best[c, i] = val
                    arg[c, i] = v
    return feasible_arr, best_arr, arg_arr
