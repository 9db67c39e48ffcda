# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Poisson-binomial kernels.

Arithmetic order mirrors ``_pykernels`` so both backends agree bit for bit.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def poibin_pmf(const double[::1] betas):
    cdef Py_ssize_t n = betas.shape[0]
    cdef Py_ssize_t i, j
    cdef double b, q, prev, cur
    out = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] pmf = out
    pmf[0] = 1.0
    for i in range(n):
        b = betas[i]
        q = 1.0 - b
        # in-place update from the top so pmf[j - 1] is still the old value
        pmf[i + 1] = pmf[i] * b
        for j in range(i, 0, -1):
            pmf[j] = pmf[j] * q + pmf[j - 1] * b
        pmf[0] = pmf[0] * q
    for j in range(n + 1):
        if pmf[j] < 0.0:
            pmf[j] = 0.0
    return out


def survival_from_pmf(const double[::1] pmf):
    cdef Py_ssize_t n = pmf.shape[0] - 1
    cdef Py_ssize_t t
    cdef double acc = 0.0
    out = np.zeros(n + 2, dtype=np.float64)
    cdef double[::1] surv = out
    for t in range(n, -1, -1):
        acc += pmf[t]
        surv[t] = 1.0 if acc > 1.0 else acc
    surv[0] = 1.0
    return out


cdef inline double _tail(const double[::1] surv, Py_ssize_t t) noexcept nogil:
    cdef Py_ssize_t n = surv.shape[0] - 2
    if t <= 0:
        return 1.0
    if t > n:
        return 0.0
    return surv[t]


cdef double _lp_alpha(const double[::1] surv, Py_ssize_t v) noexcept nogil:
    cdef Py_ssize_t n = surv.shape[0] - 2
    cdef Py_ssize_t j
    cdef double base = _tail(surv, v)
    cdef double best = 0.0
    cdef double cand
    for j in range(1, n + 1):
        cand = (_tail(surv, v - j) - base) / j
        if cand > best:
            best = cand
    return best


def lp_alpha(const double[::1] surv, Py_ssize_t v):
    return _lp_alpha(surv, v)


def inflated_quantile(const double[::1] surv, double n_delta, double alpha):
    cdef Py_ssize_t n = surv.shape[0] - 2
    cdef Py_ssize_t v
    cdef double total
    for v in range(0, n + 1):
        total = _tail(surv, v + 1)
        if n_delta > 0.0:
            total = total + _lp_alpha(surv, v + 1) * n_delta
        if total <= alpha:
            return v
    return n
