"""Shared coefficient tables for the Bessel kernels.

Two branches per function, switching at ``SWITCH_X``:

* ``(0, SWITCH_X]``  — ascending power series in u = (x/2)^2 with exact
  analytic coefficients (31 terms; worst-case absolute error ~1e-13 at
  the switch point, set by float64 cancellation, not truncation).
* ``(SWITCH_X, inf)`` — Hankel asymptotic form with rational-function
  modulus/phase corrections (Cephes tables, fitted for x > 5).

Both backends (Cython and NumPy) read these tables so they evaluate the
same approximations.
"""

import numpy as np

SWITCH_X = 8.0
EULER_GAMMA = 0.5772156649015329
SQRT_2_OVER_PI = 0.7978845608028654
PI_OVER_4 = 0.7853981633974483
THREE_PI_OVER_4 = 2.356194490192345

N_SERIES = 30  # highest power of u retained

_k = np.arange(N_SERIES + 2, dtype=np.float64)
_fact = np.cumprod(np.concatenate([[1.0], _k[1:]]))  # k!
_harm = np.concatenate([[0.0], np.cumsum(1.0 / _k[1:])])  # H_k

_sign = (-1.0) ** np.arange(N_SERIES + 1)

# J0(x)  = sum_k  CJ0[k] u^k
# J1(x)  = (x/2) sum_k CJ1[k] u^k
# Y0(x)  = (2/pi) [ (ln(x/2)+gamma) J0 + sum_k CY0[k] u^k ]
# Y1(x)  = (2/pi) [ (ln(x/2)+gamma) J1 - 1/x - (x/4) sum_k CY1[k] u^k ]
CJ0 = _sign / _fact[: N_SERIES + 1] ** 2
CJ1 = _sign / (_fact[: N_SERIES + 1] * _fact[1 : N_SERIES + 2])
CY0 = -_sign * _harm[: N_SERIES + 1] / _fact[: N_SERIES + 1] ** 2
CY1 = (
    _sign
    * (_harm[: N_SERIES + 1] + _harm[1 : N_SERIES + 2])
    / (_fact[: N_SERIES + 1] * _fact[1 : N_SERIES + 2])
)

# Asymptotic-branch rational coefficients (Cephes Math Library, S. Moshier,
# public domain). p = polevl(z, PP)/polevl(z, PQ), q = polevl(z, QP)/p1evl(z, QQ)
# with w = 5/x, z = w^2:
#   J(x) = sqrt(2/(pi x)) (p cos xn - w q sin xn)
#   Y(x) = sqrt(2/(pi x)) (p sin xn + w q cos xn)
# where xn = x - pi/4 (order 0) or x - 3pi/4 (order 1).
PP0 = np.array([
    7.96936729297347051624e-4, 8.28352392107440799803e-2, 1.23953371646414299388e0,
    5.44725003058768775090e0, 8.74716500199817011941e0, 5.30324038235394892183e0,
    9.99999999999999997821e-1,
])
PQ0 = np.array([
    9.24408810558863637013e-4, 8.56288474354474431428e-2, 1.25352743901058953537e0,
    5.47097740330417105182e0, 8.76190883237069594232e0, 5.30605288235394617618e0,
    1.00000000000000000218e0,
])
QP0 = np.array([
    -1.13663838898469149931e-2, -1.28252718670509318512e0, -1.95539544257735972385e1,
    -9.32060152123768231369e1, -1.77681167980488050595e2, -1.47077505154951170175e2,
    -5.14105326766599330220e1, -6.05014350600728481186e0,
])
QQ0 = np.array([  # monic: leading coefficient 1 implicit
    6.43178256118178023184e1, 8.56430025976980587198e2, 3.88240183605401609683e3,
    7.24046774195652478189e3, 5.93072701187316984827e3, 2.06209331660327847417e3,
    2.42005740240291393179e2,
])
PP1 = np.array([
    7.62125616208173112003e-4, 7.31397056940917570436e-2, 1.12719608129684925192e0,
    5.11207951146807644818e0, 8.42404590141772420927e0, 5.21451598682361504063e0,
    1.00000000000000000254e0,
])
PQ1 = np.array([
    5.71323128072548699714e-4, 6.88455908754495404082e-2, 1.10514232634061696926e0,
    5.07386386128601488557e0, 8.39985554327604159757e0, 5.20982848682361821619e0,
    9.99999999999999997461e-1,
])
QP1 = np.array([
    5.10862594750176621635e-2, 4.98213872951233449420e0, 7.58238284132545283818e1,
    3.66779609360150777800e2, 7.10856304998926107277e2, 5.97489612400613639965e2,
    2.11688757100572135698e2, 2.52070205858023719784e1,
])
QQ1 = np.array([  # monic
    7.42373277035675149943e1, 1.05644886038262816351e3, 4.98641058337653607651e3,
    9.56231892404756170795e3, 7.99704160447350683650e3, 2.82619278517639096600e3,
    3.36093607810698293419e2,
])
