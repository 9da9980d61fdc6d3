"""Real-argument Bessel J/Y (orders 0, 1) and the outgoing Hankel function.

Backend selection at import: the compiled Cython kernels when available,
otherwise the pure-NumPy reference (force the latter by setting the
environment variable ``WIFIELD_PURE_PYTHON=1``). Both evaluate the same
two-branch approximation (series up to x = 8, Hankel asymptotic beyond)
and agree to float64 rounding; ``benchmarks/bench_specfun.py`` compares
their throughput.

Higher orders for the cylinder oracle come from `jn_all` / `yn_all`
(forward recurrence for Y, Miller's backward recurrence for J when the
order exceeds the argument).
"""

import os

import numpy as np

if os.environ.get("WIFIELD_PURE_PYTHON"):
    from . import _reference as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _reference as _impl

        BACKEND = "python"

__all__ = ["BACKEND", "bessel", "hankel2", "j0", "j1", "y0", "y1", "jn_all", "yn_all"]

_Y_SATURATE = 1e280


def _kernels_available() -> bool:
    try:
        from . import _kernels  # noqa: F401

        return True
    except ImportError:
        return False


def backends() -> dict:
    """Name -> module for every importable backend (benchmark helper)."""
    from . import _reference

    out = {}
    if _kernels_available():
        from . import _kernels

        out["cython"] = _kernels
    out["python"] = _reference
    return out


def _prepare(x, positive_only):
    """Validate and flatten input; returns (flat float64 array, shape, scalar?)."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    flat = np.ascontiguousarray(arr.ravel())
    if np.isnan(flat).any():
        raise ValueError("NaN argument to Bessel function")
    if not np.isfinite(flat).all():
        raise ValueError("non-finite argument to Bessel function")
    if positive_only:
        if (flat <= 0).any():
            raise ValueError("argument must be > 0 for Y/Hankel functions")
    elif (flat < 0).any():
        raise ValueError("argument must be >= 0 for J functions")
    return flat, arr.shape, scalar


def _finish(flat, shape, scalar):
    return float(flat[0]) if scalar else flat.reshape(shape)


def j0(x):
    flat, shape, scalar = _prepare(x, positive_only=False)
    return _finish(_impl.j0(flat), shape, scalar)


def j1(x):
    flat, shape, scalar = _prepare(x, positive_only=False)
    return _finish(_impl.j1(flat), shape, scalar)


def y0(x):
    flat, shape, scalar = _prepare(x, positive_only=True)
    return _finish(_impl.y0(flat), shape, scalar)


def y1(x):
    flat, shape, scalar = _prepare(x, positive_only=True)
    return _finish(_impl.y1(flat), shape, scalar)


def bessel(kind, order, x):
    """Evaluate J or Y of order 0 or 1.

    Parameters
    ----------
    kind : {"J", "Y"}
    order : {0, 1}
    x : scalar or array, >= 0 for J and > 0 for Y.
    """
    if kind not in ("J", "Y"):
        raise ValueError(f"kind must be 'J' or 'Y', got {kind!r}")
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order!r}")
    table = {("J", 0): j0, ("J", 1): j1, ("Y", 0): y0, ("Y", 1): y1}
    return table[(kind, order)](x)


def hankel2(order, x):
    """Second-kind Hankel function H^(2)_order(x) = J - jY (outgoing wave
    under the e^{+j omega t} convention). Requires x > 0."""
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order!r}")
    flat, shape, scalar = _prepare(x, positive_only=True)
    jf = _impl.j0(flat) if order == 0 else _impl.j1(flat)
    yf = _impl.y0(flat) if order == 0 else _impl.y1(flat)
    out = jf - 1j * yf
    return complex(out[0]) if scalar else out.reshape(shape)


def jn_all(n_max, x):
    """J_0..J_n_max at scalar x >= 0.

    Forward recurrence when x > n_max (stable there); otherwise Miller's
    backward recurrence normalized by J0 + 2*sum J_{2k} = 1.
    """
    x = float(x)
    if x < 0:
        raise ValueError("x must be >= 0")
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    if n_max == 0:
        out[0] = j0(x)
        return out
    if x > n_max:
        out[0] = j0(x)
        out[1] = j1(x)
        for k in range(1, n_max):
            out[k + 1] = (2.0 * k / x) * out[k] - out[k - 1]
        return out
    # Miller: start well above n_max, recur down, rescale to dodge overflow.
    m = n_max + int(2 * np.sqrt(40.0 * (n_max + 1)))
    jp, jc = 0.0, 1e-30
    norm = 0.0
    for k in range(m, 0, -1):
        jm = (2.0 * k / x) * jc - jp
        jp, jc = jc, jm
        if abs(jc) > 1e250:
            scale = 1e-250
            jc *= scale
            jp *= scale
            norm *= scale
            out *= scale
        if k - 1 <= n_max:
            out[k - 1] = jc
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * jc
    norm += jc  # J0 term (k-1 == 0 leaves jc = J0 estimate)
    out /= norm
    return out


def yn_all(n_max, x):
    """Y_0..Y_n_max at scalar x > 0 by forward recurrence (stable).

    Y_n grows factorially for n >> x; magnitudes are saturated at 1e280
    so downstream ratios (where Y appears in denominators) go to zero
    instead of overflowing.
    """
    x = float(x)
    if x <= 0:
        raise ValueError("x must be > 0")
    out = np.empty(n_max + 1)
    out[0] = y0(x)
    if n_max == 0:
        return out
    out[1] = y1(x)
    for k in range(1, n_max):
        nxt = (2.0 * k / x) * out[k] - out[k - 1]
        if abs(nxt) > _Y_SATURATE or not np.isfinite(nxt):
            out[k + 1 :] = np.sign(nxt) * _Y_SATURATE if np.isfinite(nxt) else -_Y_SATURATE
            break
        out[k + 1] = nxt
    return out
