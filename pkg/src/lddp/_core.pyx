# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contract as ``lddp._fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


def sq_exp_cross(a, b, double sigma_f, double sigma_l):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], p = av.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double d2, diff
    cdef double scale = sigma_f * sigma_f
    cdef double inv_l2 = 1.0 / (sigma_l * sigma_l)
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(na):
            for j in range(nb):
                d2 = 0.0
                for t in range(p):
                    diff = av[i, t] - bv[j, t]
                    d2 = d2 + diff * diff
                ov[i, j] = scale * exp(-d2 * inv_l2)
    return out


def softmax_rows(logits):
    cdef double[:, ::1] lv = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t n = lv.shape[0], k = lv.shape[1]
    cdef Py_ssize_t i, j
    cdef double top, s, e
    out = np.empty((n, k), dtype=np.float64)
    lognorm = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double[::1] zv = lognorm
    with nogil:
        for i in range(n):
            top = -INFINITY
            for j in range(k):
                if lv[i, j] > top:
                    top = lv[i, j]
            s = 0.0
            for j in range(k):
                e = exp(lv[i, j] - top)
                ov[i, j] = e
                s = s + e
            for j in range(k):
                ov[i, j] = ov[i, j] / s
            zv[i] = top + log(s)
    return out, lognorm


def mixing_normalizer(ez, f):
    cdef double[::1] zv = np.ascontiguousarray(ez, dtype=np.float64)
    cdef double[:, ::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t k = fv.shape[0], n = fv.shape[1]
    cdef Py_ssize_t i, j
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for j in range(k):
            for i in range(n):
                ov[i] = ov[i] + zv[j] * exp(fv[j, i])
    return out


def exp_over_xi_sums(f, xi):
    cdef double[:, ::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef double[::1] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t k = fv.shape[0], n = fv.shape[1]
    cdef Py_ssize_t i, j
    cdef double s
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for j in range(k):
            s = 0.0
            for i in range(n):
                s = s + exp(fv[j, i]) / xv[i]
            ov[j] = s
    return out


def mahalanobis_sq(x, m, w):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[:, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1], k = mv.shape[0]
    cdef Py_ssize_t i, j, a, c
    cdef double q, row
    cdef double[::1] diff = np.empty(d, dtype=np.float64)
    out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(n):
            for j in range(k):
                for a in range(d):
                    diff[a] = xv[i, a] - mv[j, a]
                q = 0.0
                for a in range(d):
                    row = 0.0
                    for c in range(d):
                        row = row + wv[j, a, c] * diff[c]
                    q = q + diff[a] * row
                ov[i, j] = q
    return out


def nearest_centroid(x, c):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1], k = cv.shape[0]
    cdef Py_ssize_t i, j, t
    cdef double d2, diff, best
    cdef cnp.int64_t arg
    labels = np.zeros(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] lv = labels
    cdef double[::1] dv = dist
    with nogil:
        for i in range(n):
            best = INFINITY
            arg = 0
            for j in range(k):
                d2 = 0.0
                for t in range(d):
                    diff = xv[i, t] - cv[j, t]
                    d2 = d2 + diff * diff
                if d2 < best:
                    best = d2
                    arg = j
            lv[i] = arg
            dv[i] = best
    return labels, dist


def contingency(a, b, Py_ssize_t na, Py_ssize_t nb):
    cdef cnp.int64_t[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.int64_t[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t i, n = av.shape[0]
    table = np.zeros((na, nb), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] tv = table
    with nogil:
        for i in range(n):
            tv[av[i], bv[i]] += 1
    return table
