"""Bessel/Hankel kernel validation against a high-precision reference."""

import mpmath as mp
import numpy as np
import pytest

from wifield import specfun
from wifield.specfun import backends, bessel, hankel2, jn_all, yn_all

mp.mp.dps = 30


def _ref(kind, order, x):
    f = mp.besselj if kind == "J" else mp.bessely
    return float(f(order, x))


@pytest.fixture(scope="module")
def sample_points():
    return np.concatenate(
        [
            np.logspace(-8, np.log10(8.0), 120),
            np.linspace(8.0 + 1e-9, 50.0, 120),
            [8.0, 0.5, 1.0, 2.0, np.pi, 10.0, 25.0, 49.9],
        ]
    )


@pytest.mark.parametrize("kind,order", [("J", 0), ("J", 1), ("Y", 0), ("Y", 1)])
def test_accuracy_against_high_precision(kind, order, sample_points):
    # absolute error < 1e-10 wherever the function is O(1e3); near the
    # origin Y diverges and float64 can only deliver relative accuracy
    for x in sample_points:
        got = bessel(kind, order, float(x))
        ref = _ref(kind, order, float(x))
        err = abs(got - ref)
        if abs(ref) <= 1e3:
            assert err < 1e-10, f"{kind}{order}({x}) err {err:.2e}"
        else:
            assert err / abs(ref) < 1e-12


def test_j_at_origin():
    assert bessel("J", 0, 0.0) == 1.0
    assert bessel("J", 1, 0.0) == 0.0


def test_first_j0_zero_by_bisection_oracle():
    # derive the zero independently by bisection on the mpmath reference
    lo, hi = mp.mpf(2), mp.mpf(3)
    for _ in range(80):
        mid = (lo + hi) / 2
        if mp.besselj(0, lo) * mp.besselj(0, mid) <= 0:
            hi = mid
        else:
            lo = mid
    zero = float((lo + hi) / 2)
    assert abs(zero - 2.404825557695773) < 1e-12
    assert abs(bessel("J", 0, 2.404825557695773)) < 1e-9


def test_y0_log_singularity_sign():
    assert bessel("Y", 0, 1e-8) < -10.0


def test_hankel2_definition(sample_points):
    xs = sample_points[sample_points > 0][:40]
    h = hankel2(0, xs)
    assert np.allclose(h.real, specfun.j0(xs), rtol=0, atol=1e-15)
    assert np.allclose(h.imag, -specfun.y0(xs), rtol=0, atol=1e-15)


def test_hankel2_large_argument_modulus():
    x = 40.0
    target = np.sqrt(2.0 / np.pi)
    assert abs(abs(hankel2(0, x)) * np.sqrt(x) - target) / target < 0.01


def test_hankel2_order1_values():
    got = hankel2(1, 1.0)
    ref = complex(mp.besselj(1, 1.0)) - 1j * complex(mp.bessely(1, 1.0))
    assert abs(got.real - ref.real) < 1e-10
    assert abs(got.imag - ref.imag) < 1e-10


def test_wronskian_identity():
    xs = np.logspace(-3, np.log10(50.0), 100)
    w = specfun.j1(xs) * specfun.y0(xs) - specfun.j0(xs) * specfun.y1(xs)
    target = 2.0 / (np.pi * xs)
    assert np.max(np.abs(w - target) / np.abs(target)) < 1e-8


def test_branch_continuity_at_switch():
    left = 8.0
    right = np.nextafter(8.0, 9.0)
    for fn in (specfun.j0, specfun.j1, specfun.y0, specfun.y1):
        assert abs(fn(left) - fn(right)) < 1e-9


def test_domain_errors():
    with pytest.raises(ValueError):
        bessel("Y", 0, 0.0)
    with pytest.raises(ValueError):
        bessel("Y", 1, -1.0)
    with pytest.raises(ValueError):
        bessel("J", 0, -0.5)
    with pytest.raises(ValueError):
        bessel("J", 0, float("nan"))
    with pytest.raises(ValueError):
        hankel2(0, 0.0)
    with pytest.raises(ValueError):
        bessel("J", 2, 1.0)


def test_backends_agree():
    impls = backends()
    if len(impls) < 2:
        pytest.skip("compiled kernels not built")
    x = np.ascontiguousarray(np.logspace(-6, np.log10(50.0), 5000))
    for fname in ("j0", "j1", "y0", "y1"):
        vals = [getattr(mod, fname)(x) for mod in impls.values()]
        assert np.max(np.abs(vals[0] - vals[1])) < 1e-14


@pytest.mark.parametrize("x", [0.7, 1.57, 9.3, 31.0])
def test_recurrence_orders_match_reference(x):
    nmax = 25
    js = jn_all(nmax, x)
    ys = yn_all(nmax, x)
    for n in range(nmax + 1):
        ref_j = float(mp.besselj(n, x))
        ref_y = float(mp.bessely(n, x))
        assert abs(js[n] - ref_j) < 1e-10 * max(1.0, abs(ref_j))
        assert abs(ys[n] - ref_y) < 1e-9 * max(1.0, abs(ref_y))


def test_jn_all_at_zero():
    js = jn_all(10, 0.0)
    assert js[0] == 1.0
    assert np.all(js[1:] == 0.0)


def test_yn_all_saturates_instead_of_overflowing():
    ys = yn_all(300, 1.5)
    assert np.isfinite(ys).all()
