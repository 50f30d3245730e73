"""Airy function, integer-order Bessel functions of the first kind and their zeros.

Everything here works in binary64 and is self-contained: scipy is only used
for bracketed root finding (``brentq``). The tests compare against
``scipy.special`` and ``mpmath``, which are independent implementations.

Airy strategy
-------------
* ``-15 <= x <= 2``: Taylor expansion about the nearest node of a 0.25-spaced
  grid. The node values come from stepping the Airy equation ``y'' = x y``
  outwards from the exact values at the origin with high-order Taylor steps.
* ``x > 2``: ``Ai`` through the modified Bessel function ``K_{1/3}``,
  evaluated with Steed's continued fraction (accurate once the argument of
  ``K`` exceeds ~1.9).
* ``x < -15``: Poincare asymptotic expansions in ``zeta = 2/3 |x|^{3/2}``,
  truncated at the smallest term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError, PoleError

__all__ = [
    "AI0",
    "AIP0",
    "AiryPair",
    "AiryZeroTable",
    "BesselEval",
    "airy",
    "airy_zero",
    "airy_prime_zero_first",
    "airy_zero_asymptotic",
    "airy_zeros",
    "airy_zero_table",
    "bessel_j",
    "bessel_j_ratio",
    "bessel_first_zero",
    "bessel_prime_first_zero",
]

AI0 = 0.35502805388781723926  # Ai(0) = 3^{-2/3} / Gamma(2/3)
AIP0 = -0.25881940379280679840  # Ai'(0) = -3^{-1/3} / Gamma(1/3)

AIRY_WINDOW = 60.0
_NODE_STEP = 0.25
_TAYLOR_LO = -15.0
_TAYLOR_HI = 2.0


@dataclass(frozen=True)
class AiryPair:
    value: float
    derivative: float
    argument: float


@dataclass(frozen=True)
class AiryZeroTable:
    ai_zeros: tuple[float, ...]
    ai_prime_first: float


@dataclass(frozen=True)
class BesselEval:
    order: int
    argument: float
    value: float


# ---------------------------------------------------------------------------
# Airy function


def _taylor(x0: float, y: float, yp: float, h: float) -> tuple[float, float]:
    """Advance (Ai, Ai') from x0 to x0 + h with the power series of y'' = x y."""
    if h == 0.0:
        return y, yp
    # a_k are Taylor coefficients about x0; keep three of them rolling
    a0, a1 = y, yp
    a2 = 0.5 * x0 * a0
    val = a0 + h * a1 + h * h * a2
    der = a1 + 2.0 * h * a2
    km3, km2, km1 = a0, a1, a2
    hk = h * h  # h^(k-1) for the derivative, h^k for the value after update
    small = 0
    for k in range(3, 200):
        ak = (x0 * km2 + km3) / (k * (k - 1))
        dterm = k * ak * hk
        hk *= h
        vterm = ak * hk
        val += vterm
        der += dterm
        if abs(vterm) <= 1e-18 * abs(val) and abs(dterm) <= 1e-18 * abs(der):
            small += 1
            if small >= 3:
                break
        else:
            small = 0
        km3, km2, km1 = km2, km1, ak
    return val, der


@lru_cache(maxsize=1)
def _node_table() -> tuple[tuple[float, ...], tuple[float, ...]]:
    count = int(round((_TAYLOR_HI - _TAYLOR_LO) / _NODE_STEP)) + 1
    origin = int(round(-_TAYLOR_LO / _NODE_STEP))
    vals = [0.0] * count
    ders = [0.0] * count
    vals[origin], ders[origin] = AI0, AIP0
    # finer sub-steps keep every step well inside the radius where the
    # series converges quickly
    sub = 4
    h = _NODE_STEP / sub
    for direction in (1, -1):
        y, yp = AI0, AIP0
        i = origin
        while 0 <= i + direction < count:
            x = _TAYLOR_LO + i * _NODE_STEP
            for s in range(sub):
                y, yp = _taylor(x + direction * s * h, y, yp, direction * h)
            i += direction
            vals[i], ders[i] = y, yp
    return tuple(vals), tuple(ders)


def _u_coeffs(count: int) -> list[float]:
    u = [1.0]
    for k in range(1, count):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k))
    return u


_U = _u_coeffs(60)
_V = [1.0] + [-(6 * k + 1) / (6 * k - 1) * _U[k] for k in range(1, 60)]


def _airy_negative_asymptotic(x: float) -> tuple[float, float]:
    """Asymptotic expansions of Ai(x), Ai'(x) for large negative x."""
    z = -x
    zeta = 2.0 / 3.0 * z * math.sqrt(z)
    # sums P, Q (for Ai) and R, S (for Ai'), truncated before the terms grow
    p = q = r = s = 0.0
    last = math.inf
    zinv = 1.0 / zeta
    power = 1.0
    for k in range(len(_U)):
        term_u = _U[k] * power
        if abs(term_u) > last:
            break
        last = abs(term_u)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * term_u
            r += sign * _V[k] * power
        else:
            q += sign * term_u
            s += sign * _V[k] * power
        if last < 1e-17:
            break
        power *= zinv
    phase = zeta - 0.25 * math.pi
    c, sn = math.cos(phase), math.sin(phase)
    root = 1.0 / math.sqrt(math.pi)
    quarter = z ** 0.25
    value = root / quarter * (c * p + sn * q)
    deriv = root * quarter * (sn * r - c * s)
    return value, deriv


def _bessel_k_steed(nu: float, x: float) -> tuple[float, float]:
    """exp(x) K_nu(x) and exp(x) K_{nu+1}(x) for |nu| <= 1/2 and x >= ~2."""
    nu2 = nu * nu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - nu2
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 10_000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < 1e-17:
            break
    else:  # pragma: no cover - the fraction converges in < 100 steps for x >= 2
        raise NumericError("Steed continued fraction did not converge")
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) / s
    k1 = kmu * (nu + x + 0.5 - h) / x
    return kmu, k1


def _airy_positive(x: float) -> tuple[float, float]:
    zeta = 2.0 / 3.0 * x * math.sqrt(x)
    k13, k43 = _bessel_k_steed(1.0 / 3.0, zeta)
    k23 = k43 - 2.0 / (3.0 * zeta) * k13
    damp = math.exp(-zeta)
    value = math.sqrt(x / 3.0) / math.pi * k13 * damp
    deriv = -x / (math.pi * math.sqrt(3.0)) * k23 * damp
    return value, deriv


def _airy_raw(x: float) -> tuple[float, float]:
    if x > _TAYLOR_HI:
        return _airy_positive(x)
    if x < _TAYLOR_LO:
        return _airy_negative_asymptotic(x)
    vals, ders = _node_table()
    i = int(round((x - _TAYLOR_LO) / _NODE_STEP))
    x0 = _TAYLOR_LO + i * _NODE_STEP
    return _taylor(x0, vals[i], ders[i], x - x0)


def airy(x: float) -> AiryPair:
    """Ai(x) and Ai'(x) for real x in [-60, 60]."""
    x = float(x)
    if not (-AIRY_WINDOW <= x <= AIRY_WINDOW):
        raise DomainError(f"airy: argument {x} outside [-60, 60]")
    v, d = _airy_raw(x)
    return AiryPair(v, d, x)


def airy_log_derivative(x: float) -> float:
    """Ai'(x)/Ai(x); the ratio stays finite for large positive x where both underflow."""
    x = float(x)
    if not (-AIRY_WINDOW <= x):
        raise DomainError(f"airy_log_derivative: argument {x} below -60")
    if x > _TAYLOR_HI:
        zeta = 2.0 / 3.0 * x * math.sqrt(x)
        k13, k43 = _bessel_k_steed(1.0 / 3.0, zeta)
        k23 = k43 - 2.0 / (3.0 * zeta) * k13
        return -math.sqrt(x) * k23 / k13
    v, d = _airy_raw(x)
    return d / v


# ---------------------------------------------------------------------------
# Airy zeros



def airy_zero_asymptotic(j: int | np.ndarray) -> float | np.ndarray:
    """Asymptotic expansion of a_j; relative error below 1e-15 once j >= 20."""
    j = np.asarray(j, dtype=float)
    t = 3.0 * math.pi * (4.0 * j - 1.0) / 8.0
    t2 = 1.0 / (t * t)
    out = -t ** (2.0 / 3.0) * (
        1.0
        + t2 * (5.0 / 48.0 + t2 * (-5.0 / 36.0 + t2 * (77125.0 / 82944.0 + t2 * (-108056875.0 / 6967296.0))))
    )
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def airy_zero(j: int) -> float:
    """The j-th zero a_j of Ai (a_1 ~ -2.338), by Newton iteration."""
    if int(j) != j or j < 1:
        raise DomainError("airy_zero: j must be a positive integer")
    if j > 10_000:
        raise DomainError("airy_zero: j above 10_000")
    x = -((3.0 * math.pi * (4 * j - 1) / 8.0) ** (2.0 / 3.0))
    for _ in range(100):
        v, d = _airy_raw(x)
        step = v / d
        x -= step
        if abs(v) <= 1e-12 and abs(step) <= 4e-16 * abs(x):
            return x
    v, _ = _airy_raw(x)
    if abs(v) <= 1e-12:
        return x
    raise NumericError(f"airy_zero({j}) did not converge")


@lru_cache(maxsize=1)
def airy_prime_zero_first() -> float:
    """a_1', the zero of Ai' closest to the origin (~ -1.019)."""
    x = -((3.0 * math.pi / 8.0) ** (2.0 / 3.0))
    for _ in range(100):
        v, d = _airy_raw(x)
        step = d / (x * v)
        x -= step
        if abs(d) <= 1e-14 and abs(step) <= 4e-16 * abs(x):
            return x
    raise NumericError("airy_prime_zero_first did not converge")


_NEWTON_ZEROS = 200


@lru_cache(maxsize=8)
def airy_zeros(count: int) -> np.ndarray:
    """a_1..a_count as a read-only array (Newton for j <= 200, asymptotics after)."""
    count = int(count)
    head = [airy_zero(j) for j in range(1, min(count, _NEWTON_ZEROS) + 1)]
    if count > _NEWTON_ZEROS:
        tail = airy_zero_asymptotic(np.arange(_NEWTON_ZEROS + 1, count + 1))
        out = np.concatenate([np.array(head), tail])
    else:
        out = np.array(head)
    out.setflags(write=False)
    return out


def airy_zero_table(count: int = 100) -> AiryZeroTable:
    return AiryZeroTable(tuple(float(a) for a in airy_zeros(count)), airy_prime_zero_first())


# ---------------------------------------------------------------------------
# Bessel J_k


def _check_order(k: int) -> int:
    if int(k) != k or k < 0:
        raise DomainError("Bessel order must be a nonnegative integer")
    if k > 10**7:
        raise DomainError("Bessel order above 1e7")
    return int(k)


def _bessel_series(k: int, x: float) -> float:
    y = 0.25 * x * x
    lead = k * math.log(0.5 * x) - math.lgamma(k + 1)
    if lead < -745.0:
        return 0.0
    total, term = 1.0, 1.0
    for l in range(1, 10_000):
        term *= -y / (l * (l + k))
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return math.exp(lead) * total


def _bessel_miller(k: int, x: float) -> float:
    m = max(k, x)
    top = int(m + 10.0 * m ** (1.0 / 3.0) + 40)
    top += top % 2
    jp1, j = 0.0, 1e-300
    even_sum = 0.0
    found = 0.0
    for order in range(top, 0, -1):
        # j = J_order, jp1 = J_{order+1}; step to J_{order-1}
        jm1 = 2.0 * order / x * j - jp1
        jp1, j = j, jm1
        if order - 1 == k:
            found = j
        if (order - 1) % 2 == 0 and order - 1 > 0:
            even_sum += j
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            even_sum *= 1e-250
            found *= 1e-250
    if k == top:  # pragma: no cover - top > k always
        found = 1e-300
    norm = j + 2.0 * even_sum
    return found / norm


def bessel_j(k: int, x: float) -> float:
    """J_k(x) for integer k >= 0 and x >= 0."""
    k = _check_order(k)
    x = float(x)
    if x < 0:
        raise DomainError("bessel_j: negative argument")
    if x > 1e7:
        raise NumericError("bessel_j: argument above 1e7")
    if x == 0.0:
        return 1.0 if k == 0 else 0.0
    if x <= 1.0 or 0.25 * x * x <= k + 1:
        return _bessel_series(k, x)
    return _bessel_miller(k, x)


def _cf_inverse_ratio(k: int, x: float) -> float:
    """J_{k-1}(x)/J_k(x) by the modified Lentz algorithm for the fraction
    b_0 - 1/(b_1 - 1/(b_2 - ...)), b_i = 2(k+i)/x."""
    tiny = 1e-300
    f = 2.0 * k / x
    if f == 0.0:
        f = tiny
    c, d = f, 0.0
    limit = 10_000 + int(2 * x)
    for i in range(1, limit):
        b = 2.0 * (k + i) / x
        d = b - d
        if d == 0.0:
            d = tiny
        c = b - 1.0 / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            return f
    raise NumericError("Bessel continued fraction did not converge")


def bessel_j_ratio(k: int, x: float) -> float:
    """J_k(x)/J_{k-1}(x) by continued fraction; valid below the first zero of J_{k-1}."""
    k = _check_order(k)
    if k < 1:
        raise DomainError("bessel_j_ratio: order must be positive")
    x = float(x)
    if x <= 0:
        raise DomainError("bessel_j_ratio: argument must be positive")
    inv = _cf_inverse_ratio(k, x)
    # J_{k-1}/J_k stays positive below j_{k-1}; a sign change means we crossed it
    if inv <= 1e-12 * (2.0 * k / x):
        raise PoleError(f"J_{k - 1} vanishes at or below x={x}")
    return 1.0 / inv


def _zero_bracket(g, lo: float, hi: float) -> tuple[float, float]:
    step = 0.25
    for _ in range(400):
        if g(hi) < 0:
            return lo, hi
        lo, hi = hi, hi + step
    raise NumericError("could not bracket Bessel zero")  # pragma: no cover


@lru_cache(maxsize=4096)
def bessel_first_zero(k: int) -> float:
    """j_k, the first positive zero of J_k."""
    k = _check_order(k)

    def h(x: float) -> float:  # J_k / J_{k+1}: continuous on (0, j_{k+1})
        return _cf_inverse_ratio(k + 1, x)

    if k == 0:
        lo, hi = 1.0, 3.0
    else:
        c = k ** (1.0 / 3.0)
        lo = float(k)
        hi = k + 1.8557571 * c + 1.033150 / c + 0.5
    lo, hi = _zero_bracket(h, lo, hi)
    return brentq(h, lo, hi, xtol=1e-300, rtol=9e-16, maxiter=200)


@lru_cache(maxsize=4096)
def bessel_prime_first_zero(k: int) -> float:
    """j_k', the first positive zero of J_k' (k >= 1)."""
    k = _check_order(k)
    if k < 1:
        raise DomainError("bessel_prime_first_zero: order must be positive")
    jk = bessel_first_zero(k)

    # J_k'(x)/J_{k+1}(x) = (k/x) J_k/J_{k+1} - 1 by (k/x)J_k - J_{k+1} = J_k'
    def g(x: float) -> float:
        return k / x * _cf_inverse_ratio(k + 1, x) - 1.0

    return brentq(g, float(k), jk, xtol=1e-300, rtol=9e-16, maxiter=200)
