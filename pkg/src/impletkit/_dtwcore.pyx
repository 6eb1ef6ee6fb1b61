# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled DTW kernels: same contracts as tsdist._python.

Per-point cost is the weighted squared Euclidean distance; the accumulated
cost is returned without a square root. Step set {(1,0), (0,1), (1,1)},
no warping window. Traceback ties prefer diagonal, then up, then left.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


cdef inline double _pt(const double[:, ::1] a, const double[:, ::1] b,
                       Py_ssize_t i, Py_ssize_t j,
                       const double[::1] w) noexcept nogil:
    cdef double s = 0.0
    cdef double d
    cdef Py_ssize_t c
    for c in range(a.shape[1]):
        d = a[i, c] - b[j, c]
        s += w[c] * d * d
    return s


cdef double _cost_rolling(const double[:, ::1] a, const double[:, ::1] b,
                          const double[::1] w, double* prev,
                          double* cur) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double best
    cdef double* tmp
    prev[0] = _pt(a, b, 0, 0, w)
    for j in range(1, m):
        prev[j] = prev[j - 1] + _pt(a, b, 0, j, w)
    for i in range(1, n):
        cur[0] = prev[0] + _pt(a, b, i, 0, w)
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = best + _pt(a, b, i, j, w)
        tmp = prev
        prev = cur
        cur = tmp
    return prev[m - 1]


def dtw_cost(const double[:, ::1] a, const double[:, ::1] b,
             const double[::1] weights):
    buf_prev = np.empty(b.shape[0], dtype=np.float64)
    buf_cur = np.empty(b.shape[0], dtype=np.float64)
    cdef double[::1] prev = buf_prev
    cdef double[::1] cur = buf_cur
    cdef double out
    with nogil:
        out = _cost_rolling(a, b, weights, &prev[0], &cur[0])
    return out


cdef void _fill_accumulated(const double[:, ::1] a, const double[:, ::1] b,
                            const double[::1] w,
                            double[:, ::1] acc) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double best
    acc[0, 0] = _pt(a, b, 0, 0, w)
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + _pt(a, b, 0, j, w)
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + _pt(a, b, i, 0, w)
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = best + _pt(a, b, i, j, w)


def dtw_accumulated(const double[:, ::1] a, const double[:, ::1] b,
                    const double[::1] weights):
    acc = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    cdef double[:, ::1] acc_view = acc
    with nogil:
        _fill_accumulated(a, b, weights, acc_view)
    return acc


def dtw_path(const double[:, ::1] a, const double[:, ::1] b,
             const double[::1] weights):
    acc = dtw_accumulated(a, b, weights)
    cdef double[:, ::1] acc_view = acc
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    rev_a = np.empty(n + m, dtype=np.int64)
    rev_b = np.empty(n + m, dtype=np.int64)
    cdef cnp.int64_t[::1] ra = rev_a
    cdef cnp.int64_t[::1] rb = rev_b
    cdef Py_ssize_t i = n - 1
    cdef Py_ssize_t j = m - 1
    cdef Py_ssize_t k = 1
    cdef double diag, up, left
    ra[0] = i
    rb[0] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc_view[i - 1, j - 1]
            up = acc_view[i - 1, j]
            left = acc_view[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        ra[k] = i
        rb[k] = j
        k += 1
    return (float(acc_view[n - 1, m - 1]),
            rev_a[:k][::-1].copy(), rev_b[:k][::-1].copy())


def sliding_dtw(const double[:, ::1] query, const double[:, ::1] series,
                const double[::1] weights):
    cdef Py_ssize_t q = query.shape[0]
    cdef Py_ssize_t T = series.shape[0]
    cdef Py_ssize_t n_win = T - q + 1
    out = np.empty(n_win, dtype=np.float64)
    cdef double[::1] out_view = out
    buf_prev = np.empty(q, dtype=np.float64)
    buf_cur = np.empty(q, dtype=np.float64)
    cdef double[::1] prev = buf_prev
    cdef double[::1] cur = buf_cur
    cdef Py_ssize_t start
    with nogil:
        for start in range(n_win):
            out_view[start] = _cost_rolling(query, series[start:start + q],
                                            weights, &prev[0], &cur[0])
    return out
