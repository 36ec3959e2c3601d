# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of socmob._kernels_py; same functions, same semantics."""

import numpy as np

BACKEND = "cython"


def count_pairs_within(a, b, long window):
    cdef long[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef long[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = bv.shape[0]
    cdef Py_ssize_t m = av.shape[0]
    cdef Py_ssize_t lo = 0, hi = 0, i
    cdef long x, total = 0
    for i in range(m):
        x = av[i]
        while lo < n and bv[lo] < x - window:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and bv[hi] <= x + window:
            hi += 1
        total += hi - lo
    return total


def count_pairs_within_weighted(a, b, long window, wa, wb):
    cdef long[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef long[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    cdef double[::1] wav = np.ascontiguousarray(wa, dtype=np.float64)
    cdef double[::1] wbv = np.ascontiguousarray(wb, dtype=np.float64)
    cdef Py_ssize_t n = bv.shape[0]
    cdef Py_ssize_t m = av.shape[0]
    cdef double[::1] prefix = np.zeros(n + 1, dtype=np.float64)
    cdef Py_ssize_t j, i
    cdef double acc = 0.0, total = 0.0
    cdef Py_ssize_t lo = 0, hi = 0
    cdef long x
    for j in range(n):
        acc += wbv[j]
        prefix[j + 1] = acc
    for i in range(m):
        x = av[i]
        while lo < n and bv[lo] < x - window:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and bv[hi] <= x + window:
            hi += 1
        total += wav[i] * (prefix[hi] - prefix[lo])
    return total
