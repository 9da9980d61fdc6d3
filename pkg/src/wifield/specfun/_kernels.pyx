# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Bessel kernels (hot path for Green's-operator assembly).

Scalar Horner evaluation per element over contiguous float64 arrays;
identical approximations to `_reference` via the shared `_coeffs` tables.
"""

from libc.math cimport cos, log, sin, sqrt

import numpy as np

from . import _coeffs as _c

cdef int N_SER = _c.N_SERIES  # 30
cdef double SWITCH = _c.SWITCH_X
cdef double GAMMA = _c.EULER_GAMMA
cdef double SQ2OPI = _c.SQRT_2_OVER_PI
cdef double PIO4 = _c.PI_OVER_4
cdef double THPIO4 = _c.THREE_PI_OVER_4

cdef double CJ0[31]
cdef double CJ1[31]
cdef double CY0[31]
cdef double CY1[31]
cdef double PP0[7]
cdef double PQ0[7]
cdef double QP0[8]
cdef double QQ0[7]
cdef double PP1[7]
cdef double PQ1[7]
cdef double QP1[8]
cdef double QQ1[7]


def _load_tables():
    cdef int i
    for i in range(N_SER + 1):
        CJ0[i] = _c.CJ0[i]
        CJ1[i] = _c.CJ1[i]
        CY0[i] = _c.CY0[i]
        CY1[i] = _c.CY1[i]
    for i in range(7):
        PP0[i] = _c.PP0[i]
        PQ0[i] = _c.PQ0[i]
        QQ0[i] = _c.QQ0[i]
        PP1[i] = _c.PP1[i]
        PQ1[i] = _c.PQ1[i]
        QQ1[i] = _c.QQ1[i]
    for i in range(8):
        QP0[i] = _c.QP0[i]
        QP1[i] = _c.QP1[i]


_load_tables()


cdef inline double _ser(double* coef, double u) nogil:
    cdef double acc = coef[N_SER]
    cdef int k
    for k in range(N_SER - 1, -1, -1):
        acc = acc * u + coef[k]
    return acc


cdef inline double _polevl(double* coef, int n, double z) nogil:
    cdef double acc = coef[0]
    cdef int k
    for k in range(1, n):
        acc = acc * z + coef[k]
    return acc


cdef inline double _p1evl(double* coef, int n, double z) nogil:
    cdef double acc = z + coef[0]
    cdef int k
    for k in range(1, n):
        acc = acc * z + coef[k]
    return acc


cdef inline double _j0s(double x) nogil:
    return _ser(CJ0, 0.25 * x * x)


cdef inline double _j1s(double x) nogil:
    return 0.5 * x * _ser(CJ1, 0.25 * x * x)


cdef inline double _y0s(double x) nogil:
    cdef double u = 0.25 * x * x
    return 0.6366197723675814 * ((log(0.5 * x) + GAMMA) * _ser(CJ0, u) + _ser(CY0, u))


cdef inline double _y1s(double x) nogil:
    cdef double u = 0.25 * x * x
    return 0.6366197723675814 * (
        (log(0.5 * x) + GAMMA) * (0.5 * x * _ser(CJ1, u)) - 1.0 / x - 0.25 * x * _ser(CY1, u)
    )


cdef inline void _asym(double x, int order, double* jv, double* yv) nogil:
    cdef double w = 5.0 / x
    cdef double z = w * w
    cdef double p, q, xn
    if order == 0:
        p = _polevl(PP0, 7, z) / _polevl(PQ0, 7, z)
        q = _polevl(QP0, 8, z) / _p1evl(QQ0, 7, z)
        xn = x - PIO4
    else:
        p = _polevl(PP1, 7, z) / _polevl(PQ1, 7, z)
        q = _polevl(QP1, 8, z) / _p1evl(QQ1, 7, z)
        xn = x - THPIO4
    cdef double amp = SQ2OPI / sqrt(x)
    jv[0] = amp * (p * cos(xn) - w * q * sin(xn))
    yv[0] = amp * (p * sin(xn) + w * q * cos(xn))


def j0(double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double jv, yv
    with nogil:
        for i in range(n):
            if x[i] <= SWITCH:
                out[i] = _j0s(x[i])
            else:
                _asym(x[i], 0, &jv, &yv)
                out[i] = jv
    return out_arr


def j1(double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double jv, yv
    with nogil:
        for i in range(n):
            if x[i] <= SWITCH:
                out[i] = _j1s(x[i])
            else:
                _asym(x[i], 1, &jv, &yv)
                out[i] = jv
    return out_arr


def y0(double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double jv, yv
    with nogil:
        for i in range(n):
            if x[i] <= SWITCH:
                out[i] = _y0s(x[i])
            else:
                _asym(x[i], 0, &jv, &yv)
                out[i] = yv
    return out_arr


def y1(double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double jv, yv
    with nogil:
        for i in range(n):
            if x[i] <= SWITCH:
                out[i] = _y1s(x[i])
            else:
                _asym(x[i], 1, &jv, &yv)
                out[i] = yv
    return out_arr
