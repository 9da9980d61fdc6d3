"""Pure-NumPy Bessel backend (fallback when the Cython kernels are absent).

Vectorized with branch masks; evaluates the identical approximations as
the compiled backend (shared tables in `_coeffs`). Inputs are assumed
pre-validated 1-D float64 arrays.
"""

import numpy as np

from . import _coeffs as c


def _horner(coef, z):
    acc = np.full_like(z, coef[0])
    for a in coef[1:]:
        acc = acc * z + a
    return acc


def _horner_monic(coef, z):
    acc = z + coef[0]
    for a in coef[1:]:
        acc = acc * z + a
    return acc


def _series(x, which):
    u = 0.25 * x * x
    if which == "j0":
        return _horner(c.CJ0[::-1], u)
    if which == "j1":
        return 0.5 * x * _horner(c.CJ1[::-1], u)
    if which == "y0":
        j0 = _horner(c.CJ0[::-1], u)
        return (2.0 / np.pi) * (
            (np.log(0.5 * x) + c.EULER_GAMMA) * j0 + _horner(c.CY0[::-1], u)
        )
    j1 = 0.5 * x * _horner(c.CJ1[::-1], u)
    return (2.0 / np.pi) * (
        (np.log(0.5 * x) + c.EULER_GAMMA) * j1
        - 1.0 / x
        - 0.25 * x * _horner(c.CY1[::-1], u)
    )


def _asymptotic(x, order):
    w = 5.0 / x
    z = w * w
    if order == 0:
        p = _horner(c.PP0, z) / _horner(c.PQ0, z)
        q = _horner(c.QP0, z) / _horner_monic(c.QQ0, z)
        xn = x - c.PI_OVER_4
    else:
        p = _horner(c.PP1, z) / _horner(c.PQ1, z)
        q = _horner(c.QP1, z) / _horner_monic(c.QQ1, z)
        xn = x - c.THREE_PI_OVER_4
    amp = c.SQRT_2_OVER_PI / np.sqrt(x)
    jv = amp * (p * np.cos(xn) - w * q * np.sin(xn))
    yv = amp * (p * np.sin(xn) + w * q * np.cos(xn))
    return jv, yv


def _eval(x, which):
    out = np.empty_like(x)
    lo = x <= c.SWITCH_X
    hi = ~lo
    if lo.any():
        out[lo] = _series(x[lo], which)
    if hi.any():
        order = 0 if which in ("j0", "y0") else 1
        jv, yv = _asymptotic(x[hi], order)
        out[hi] = jv if which[0] == "j" else yv
    return out


def j0(x):
    return _eval(x, "j0")


def j1(x):
    return _eval(x, "j1")


def y0(x):
    return _eval(x, "y0")


def y1(x):
    return _eval(x, "y1")
