# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the sequential inner loops.

Mirrors ``fxhybrid._pykernels`` exactly; see that module for semantics.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def exp_smooth(x, double alpha, Py_ssize_t start, double init):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out_arr = np.full(n, np.nan)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t
    cdef double prev
    if start >= n:
        return out_arr
    prev = init
    out[start] = prev
    for t in range(start + 1, n):
        prev = prev + alpha * (xv[t] - prev)
        out[t] = prev
    return out_arr


def arma_residuals(y, double c, phi, theta):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    cdef Py_ssize_t p = ph.shape[0]
    cdef Py_ssize_t q = th.shape[0]
    e_arr = np.zeros(n)
    cdef double[::1] e = e_arr
    cdef Py_ssize_t t, i, j, k
    cdef double acc
    for t in range(p, n):
        acc = yv[t] - c
        for i in range(p):
            acc -= ph[i] * yv[t - 1 - i]
        for j in range(q):
            k = t - 1 - j
            if k >= p:
                acc -= th[j] * e[k]
        e[t] = acc
    return e_arr


def analysis_step(xe, h, g):
    cdef const double[::1] xv = np.ascontiguousarray(xe, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t L = hv.shape[0]
    cdef Py_ssize_t m = (xv.shape[0] - L + 1) // 2
    a_arr = np.zeros(m)
    d_arr = np.zeros(m)
    cdef double[::1] a = a_arr
    cdef double[::1] d = d_arr
    cdef Py_ssize_t k, j, base
    cdef double sa, sd, v
    for k in range(m):
        base = 2 * k + L
        sa = 0.0
        sd = 0.0
        for j in range(L):
            v = xv[base - j]
            sa += hv[j] * v
            sd += gv[j] * v
        a[k] = sa
        d[k] = sd
    return a_arr, d_arr


def synthesis_step(a, d, h, g, Py_ssize_t n):
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t L = hv.shape[0]
    cdef Py_ssize_t m = av.shape[0]
    x_arr = np.zeros(n)
    cdef double[::1] x = x_arr
    cdef Py_ssize_t t, k, j, k_lo, k_hi
    cdef double s
    for t in range(n):
        s = 0.0
        k_lo = t // 2
        k_hi = (t + L - 2) // 2
        if k_hi > m - 1:
            k_hi = m - 1
        for k in range(k_lo, k_hi + 1):
            j = 2 * k + 1 - t
            s += av[k] * hv[j] + dv[k] * gv[j]
        x[t] = s
    return x_arr
