# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled one-pass accumulation kernels; see _fallback.py for semantics."""

from libc.math cimport exp, lgamma, log

import numpy as np

NAME = "compiled"


def gaussian_mean_agg(double[:, ::1] x, double[::1] theta, double[:, ::1] prec):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double quad = 0.0
    cdef double acc, rj
    cdef double s1 = 0.0
    cdef double t0, p00
    if d == 1:
        t0 = theta[0]
        p00 = prec[0, 0]
        with nogil:
            for i in range(n):
                rj = x[i, 0] - t0
                s1 += rj
                quad += rj * rj
        quad *= p00
        grad = np.empty(1)
        grad[0] = p00 * s1
        hess = np.empty((1, 1))
        hess[0, 0] = -n * p00
        return -0.5 * quad, grad, hess
    rsum_arr = np.zeros(d)
    r_arr = np.empty(d)
    cdef double[::1] rsum = rsum_arr
    cdef double[::1] r = r_arr
    with nogil:
        for i in range(n):
            for j in range(d):
                rj = x[i, j] - theta[j]
                r[j] = rj
                rsum[j] += rj
            for j in range(d):
                acc = 0.0
                for k in range(d):
                    acc += prec[j, k] * r[k]
                quad += acc * r[j]
    prec_arr = np.asarray(prec)
    grad = prec_arr @ rsum_arr
    hess = -float(n) * prec_arr
    return -0.5 * quad, grad, hess


def gaussian_meanlogsd_agg(double[::1] x, double mu, double s):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double w = exp(-2.0 * s)
    cdef double s1 = 0.0
    cdef double s2 = 0.0
    cdef double r
    with nogil:
        for i in range(n):
            r = x[i] - mu
            s1 += r
            s2 += r * r
    ll = -n * s - 0.5 * w * s2
    grad = np.array([w * s1, -float(n) + w * s2])
    hess = np.array([[-n * w, -2.0 * w * s1], [-2.0 * w * s1, -2.0 * w * s2]])
    return ll, grad, hess


def poisson_lograte_agg(double[::1] x, double theta, double baseline):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double sx = 0.0
    with nogil:
        for i in range(n):
            sx += x[i]
    cdef double nlam = n * baseline * exp(theta)
    ll = theta * sx - nlam
    grad = np.array([sx - nlam])
    hess = np.array([[-nlam]])
    return ll, grad, hess


def poisson_loglik_const(double[::1] x, double baseline):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double lb = log(baseline)
    cdef double acc = 0.0
    with nogil:
        for i in range(n):
            acc += lb * x[i] - lgamma(x[i] + 1.0)
    return acc
