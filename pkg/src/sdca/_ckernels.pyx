# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_pykernels`` for the reference semantics."""

from libc.math cimport sqrt

import numpy as np

cdef double BOUNDARY = 1.0 - 4.0 * 2.220446049250313e-16


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(n):
        acc += a[j] * b[j]
    return acc


def sdca12_epca_segment(const double[:, ::1] S, const double[::1] ratios, double lam,
                        double radius, double[::1] x, double[::1] y,
                        double[:, ::1] iterates=None):
    cdef Py_ssize_t m = S.shape[0], n = S.shape[1], i, j
    cdef double r, c, nv, scale, d, xn, step = 0.0
    cdef int mode
    cdef bint keep = iterates is not None
    with nogil:
        for i in range(m):
            r = ratios[i]
            c = _dot(&x[0], &S[i, 0], n)
            for j in range(n):
                y[j] = (1.0 - r) * y[j] + r * (lam * x[j] + c * S[i, j])
            nv = sqrt(_dot(&y[0], &y[0], n))
            # 0: origin, 1: interior v/mu, 2: boundary rescale
            if nv == 0.0:
                mode = 0
            elif nv / lam <= radius:
                mode = 1
            else:
                mode = 2
                scale = radius / nv * BOUNDARY
            step = 0.0
            for j in range(n):
                if mode == 0:
                    xn = 0.0
                elif mode == 1:
                    xn = y[j] / lam
                else:
                    xn = scale * y[j]
                d = xn - x[j]
                step += d * d
                x[j] = xn
            step = sqrt(step)
            if keep:
                for j in range(n):
                    iterates[i, j] = x[j]
    return step


def pss_epca_segment(const double[:, ::1] S, const double[::1] steps, double radius,
                     double[::1] x, double[:, ::1] iterates=None):
    cdef Py_ssize_t m = S.shape[0], n = S.shape[1], i, j
    cdef double c, nx, scale, d, step = 0.0
    cdef bint keep = iterates is not None
    cdef double[::1] buf = np.empty(n)
    with nogil:
        for i in range(m):
            c = steps[i] * _dot(&x[0], &S[i, 0], n)
            for j in range(n):
                buf[j] = x[j] + c * S[i, j]
            nx = sqrt(_dot(&buf[0], &buf[0], n))
            scale = radius / nx * BOUNDARY if nx > radius else 1.0
            step = 0.0
            for j in range(n):
                d = scale * buf[j] - x[j]
                step += d * d
                x[j] = scale * buf[j]
            step = sqrt(step)
            if keep:
                for j in range(n):
                    iterates[i, j] = x[j]
    return step


def weighted_gram_apply(const double[:, ::1] S, const double[::1] w, const double[::1] x,
                        double[::1] out):
    cdef Py_ssize_t m = S.shape[0], n = S.shape[1], i, j
    cdef double c
    with nogil:
        for j in range(n):
            out[j] = 0.0
        for i in range(m):
            c = w[i] * _dot(&x[0], &S[i, 0], n)
            for j in range(n):
                out[j] += c * S[i, j]
    return np.asarray(out)
