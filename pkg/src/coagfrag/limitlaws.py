"""Limit objects of the equilibrium as n -> infinity.

Discrete limit: p_k = 2 C_{k-1} / 4^k (Catalan numbers).
Continuum limit: the profile

    c(x) = |a_1'|^{-1} sum_j exp(-lambda_j x),   lambda_j = |a_j| - |a_1'|,

its Laplace functional ell(q) = -Ai'(q + a_1') / (|a_1'| Ai(q + a_1')), the
Laplace transform psi_ex of the Brownian excursion area and the moments
M_i = int x^{i+1} c(x) dx.

Sums over Airy zeros are taken explicitly for j <= 2000 and completed by an
Euler-Maclaurin tail in which a_j is continued to real j through its
asymptotic expansion; the remainder integral is mapped to (0, 1] by
j = J / v^3 so that algebraic tails become bounded integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .equilibrium import EquilibriumState, particle_law
from .errors import DomainError
from .specfun import AiryZeroTable, airy, airy_zero_table, airy_log_derivative, airy_prime_zero_first, airy_zero_asymptotic, airy_zeros

__all__ = [
    "LimitProfileEval",
    "LimitLaw",
    "limit_profile",
    "limit_particle_law",
    "l1_distance_to_limit",
    "generating_function",
    "ell",
    "ell_prime",
    "psi_ex",
    "profile_c",
    "profile_cdf",
    "profile_moment",
    "moment_recursion",
    "eqlim_residual",
    "darling_louchard_residual",
    "tl1_check",
    "tl1_integrand",
    "equfonc_residual",
    "equfonc_kernel_mass",
    "riccati_residual",
    "EXCURSION_AREA_MEAN",
    "EXCURSION_AREA_SECOND_MOMENT",
]

J_EXPLICIT = 2000
Y_MIN = 1e-4
X_SWITCH = 0.02
FD_STEP = 1e-5
# first two moments of the normalized excursion area (Louchard)
EXCURSION_AREA_MEAN = math.sqrt(math.pi / 8.0)
EXCURSION_AREA_SECOND_MOMENT = 5.0 / 12.0


@dataclass(frozen=True)
class LimitProfileEval:
    zero_table: AiryZeroTable
    abs_a1p: float
    abs_zeros: np.ndarray
    lam: np.ndarray
    series_tol: float = 1e-16
    j_cap: int = 10**6
    x_switch: float = X_SWITCH


@dataclass(frozen=True)
class LimitLaw:
    k_max: int
    p: np.ndarray  # p_1..p_{k_max}


@lru_cache(maxsize=1)
def limit_profile() -> LimitProfileEval:
    zeros = airy_zeros(J_EXPLICIT)
    abs_a1p = -airy_prime_zero_first()
    absz = -np.asarray(zeros)
    lam = absz - abs_a1p
    absz.setflags(write=False)
    lam.setflags(write=False)
    table = airy_zero_table(100)
    return LimitProfileEval(table, abs_a1p, absz, lam)


def _abs_zero_continuous(s):
    return -airy_zero_asymptotic(s)


def _em_tail(g: Callable[[np.ndarray], np.ndarray], start: int) -> float:
    """Euler-Maclaurin estimate of sum_{j >= start} g(|a_j|)."""

    def f(s):
        return g(_abs_zero_continuous(np.asarray(s, dtype=float)))

    def integrand(v):
        if v <= 0.0:
            return 0.0
        s = start / v**3
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            val = float(f(s)) * 3.0 * start / v**4
        return val if math.isfinite(val) else 0.0

    integral, _ = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    f0 = float(f(start))
    d1 = (float(f(start + 1.0)) - float(f(start - 1.0))) / 2.0
    return integral + 0.5 * f0 - d1 / 12.0


def _zero_sum(g: Callable[[np.ndarray], np.ndarray], skip_tail_below: float = 1e-18) -> float:
    """sum_{j >= 1} g(|a_j|) for a positive, eventually decreasing g."""
    prof = limit_profile()
    terms = g(prof.abs_zeros)
    total = float(np.sum(terms))
    if terms[-1] <= skip_tail_below * total:
        return total
    return total + _em_tail(g, J_EXPLICIT + 1)


# ---------------------------------------------------------------------------
# discrete limit law


def limit_particle_law(k_max: int) -> LimitLaw:
    """p_k = 2 C_{k-1}/4^k for k <= k_max, via p_{k+1} = p_k (2k-1)/(2k+2)."""
    if int(k_max) != k_max or k_max < 1 or k_max > 10**6:
        raise DomainError("k_max must lie in [1, 1e6]")
    k = np.arange(1, int(k_max))
    ratios = (2.0 * k - 1.0) / (2.0 * k + 2.0)
    p = 0.5 * np.concatenate([[1.0], np.cumprod(ratios)])
    p.setflags(write=False)
    return LimitLaw(int(k_max), p)


def limit_law_recursion_residual(law: LimitLaw) -> np.ndarray:
    """|p_k - 1/2 sum_{i<k} p_i p_{k-i}| for k = 2..k_max."""
    p = law.p
    conv = np.convolve(p, p)[: law.k_max - 1]
    return np.abs(p[1:] - 0.5 * conv)


def generating_function(law: LimitLaw, z: float) -> float:
    k = np.arange(1, law.k_max + 1)
    return float(np.dot(law.p, z**k))


def l1_distance_to_limit(state, law: LimitLaw, k_max: int | None = None, tails: bool = True) -> float:
    """sum_k |p_k^n - p_k|, plus both truncated masses when ``tails``.

    ``state`` is an EquilibriumState or a probability vector p_1, p_2, ...
    """
    if isinstance(state, EquilibriumState):
        pn = particle_law(state)
        tail_n = state.tail_mass_bound / state.m0
    elif isinstance(state, LimitLaw):
        pn = state.p
        tail_n = 1.0 - float(np.sum(pn))
    else:
        pn = np.asarray(state, dtype=float)
        tail_n = max(0.0, 1.0 - float(np.sum(pn)))
    K = min(pn.size, law.k_max)
    if k_max is not None:
        K = min(K, int(k_max))
    dist = float(np.sum(np.abs(pn[:K] - law.p[:K])))
    if isinstance(state, LimitLaw):
        # two truncations of the same sequence: beyond K the terms coincide
        return dist
    if tails:
        dist += max(0.0, 1.0 - float(np.sum(pn[:K]))) + max(0.0, tail_n)
        dist += max(0.0, 1.0 - float(np.sum(law.p[:K])))
    return dist


# ---------------------------------------------------------------------------
# Laplace functional and excursion area


def ell(q: float) -> float:
    """ell(q) = int (1 - e^{-qx}) c(x) dx."""
    q = float(q)
    abs_a1p = limit_profile().abs_a1p
    a1 = float(airy_zeros(1)[0])
    pole = a1 + abs_a1p
    if q <= pole + 1e-6:
        raise DomainError(f"ell: q={q} too close to or below the pole at {pole}")
    if q == 0.0:
        return 0.0
    return -airy_log_derivative(q - abs_a1p) / abs_a1p


def ell_prime(q: float, h: float = FD_STEP) -> float:
    return (ell(q + h) - ell(q - h)) / (2.0 * h)


def _psi_series(y: float) -> float:
    s = 2.0 ** (-1.0 / 3.0) * y ** (2.0 / 3.0)
    total = _zero_sum(lambda a: np.exp(-a * s))
    return math.sqrt(2.0 * math.pi) * y * total


def _psi_ex_any(y: float) -> float:
    """psi_ex on [0, inf): series above Y_MIN, two-moment expansion below."""
    if y < 0:
        raise DomainError("psi_ex: negative argument")
    if y < Y_MIN:
        return 1.0 - EXCURSION_AREA_MEAN * y + 0.5 * EXCURSION_AREA_SECOND_MOMENT * y * y
    return _psi_series(y)


def psi_ex(y: float) -> float:
    """E[exp(-y B_ex)] for the area B_ex of the normalized Brownian excursion."""
    y = float(y)
    if y < Y_MIN:
        raise DomainError(f"psi_ex: y={y} below {Y_MIN}; use the limit psi_ex(0) = 1")
    return _psi_series(y)


# ---------------------------------------------------------------------------
# profile


def _c_airy_sum(x: float) -> float:
    prof = limit_profile()
    return _zero_sum(lambda a: np.exp(-(a - prof.abs_a1p) * x)) / prof.abs_a1p


def _c_excursion(x: float) -> float:
    prof = limit_profile()
    y = math.sqrt(2.0) * x**1.5
    return math.exp(prof.abs_a1p * x) * _psi_ex_any(y) / (2.0 * math.sqrt(math.pi) * prof.abs_a1p * x**1.5)


def profile_c(x: float, method: str = "airy_sum") -> float:
    """Profile density c(x); below x_switch the excursion form is always used."""
    x = float(x)
    if x <= 0:
        raise DomainError("profile_c: x must be positive")
    if method not in ("airy_sum", "excursion_form"):
        raise DomainError(f"unknown method {method!r}")
    if x < X_SWITCH or method == "excursion_form":
        return _c_excursion(x)
    return _c_airy_sum(x)


def profile_c_array(x) -> np.ndarray:
    """Vectorized c(x) for quadrature grids."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    prof = limit_profile()
    out = np.empty_like(x)
    big = x * prof.lam[-1] > 45.0
    if np.any(big):
        xb = x[big]
        for i0 in range(0, xb.size, 256):
            chunk = xb[i0 : i0 + 256]
            out[np.flatnonzero(big)[i0 : i0 + 256]] = np.exp(-np.outer(chunk, prof.lam)).sum(axis=1) / prof.abs_a1p
    for i in np.flatnonzero(~big):
        out[i] = profile_c(x[i])
    return out


def profile_cdf(x):
    """int_0^x s c(s) ds from the term-wise closed forms."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    prof = limit_profile()
    out = np.empty_like(xs)
    for i, xv in enumerate(xs):
        if xv <= 0:
            out[i] = 0.0
            continue
        if not math.isfinite(xv):
            out[i] = profile_moment(0)
            continue
        mu = prof.abs_a1p

        def g(a, xv=xv):
            lam = a - mu
            return np.exp(-lam * xv) * (1.0 + lam * xv) / (lam * lam)

        out[i] = 1.0 - _zero_sum(g, skip_tail_below=1e-20) / mu
    return float(out[0]) if scalar else out


def profile_cdf_fast(x: np.ndarray) -> np.ndarray:
    """profile_cdf for many points; exact terms for x above 0.1, scalar path below."""
    xs = np.asarray(x, dtype=float)
    prof = limit_profile()
    out = np.empty_like(xs)
    big = xs * prof.lam[-1] > 45.0
    lam = prof.lam
    idx = np.flatnonzero(big)
    for i0 in range(0, idx.size, 512):
        sel = idx[i0 : i0 + 512]
        xv = xs[sel][:, None]
        out[sel] = 1.0 - (np.exp(-lam * xv) * (1.0 + lam * xv) / lam**2).sum(axis=1) / prof.abs_a1p
    for i in np.flatnonzero(~big):
        out[i] = profile_cdf(float(xs[i]))
    return out


@lru_cache(maxsize=32)
def profile_moment(i: int) -> float:
    """M_i = int x^{i+1} c(x) dx = |a_1'|^{-1} (i+1)! sum_j lambda_j^{-(i+2)}."""
    if int(i) != i or i < 0 or i > 12:
        raise DomainError("profile_moment: i must lie in [0, 12]")
    mu = limit_profile().abs_a1p
    p = i + 2
    s = _zero_sum(lambda a: (a - mu) ** (-p), skip_tail_below=0.0)
    return math.factorial(i + 1) * s / mu


def moment_recursion(i_max: int) -> np.ndarray:
    """M_0 = 1, M_1 = 1/|a_1'| and M_{i+1} = 2|a_1'| sum_j binom(i,j) M_j M_{i-j-1}."""
    if int(i_max) != i_max or i_max < 0 or i_max > 12:
        raise DomainError("moment_recursion: i_max must lie in [0, 12]")
    mu = limit_profile().abs_a1p
    M = [1.0, 1.0 / mu]
    for i in range(1, i_max):
        M.append(2.0 * mu * sum(math.comb(i, j) * M[j] * M[i - j - 1] for j in range(i)))
    return np.array(M[: i_max + 1])


# ---------------------------------------------------------------------------
# integral identities


def _gauss_panels(edges: np.ndarray, order: int = 20) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * t + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


@lru_cache(maxsize=1)
def _profile_grid() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and c-values for int_0^inf g(x) c(x) dx.

    Near zero x = s^2 absorbs the x^{-1/2} behaviour of x c(x); beyond x = 1
    panels of unit width run to x = 48 where c is below 1e-27.
    """
    s_nodes, s_w = _gauss_panels(np.linspace(0.0, 1.0, 9))
    x_small = s_nodes**2
    w_small = 2.0 * s_nodes * s_w
    x_big, w_big = _gauss_panels(np.linspace(1.0, 48.0, 48))
    x = np.concatenate([x_small, x_big])
    w = np.concatenate([w_small, w_big])
    c = profile_c_array(x)
    return x, w, c


_TEST_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "const": lambda x: np.ones_like(x),
    "linear": lambda x: x,
    "quadratic": lambda x: x * x,
    "exp_decay": lambda x: np.exp(-x),
}


def eqlim_residual(phi: str | Callable = "linear") -> float:
    """LHS - RHS of the limit equilibrium identity

        2|a_1'| int int x [phi(x+y) - phi(x)] c(x) c(y) dy dx = int x^2 [phi(x) - phi(0)] c(x) dx.
    """
    f = _TEST_FUNCTIONS[phi] if isinstance(phi, str) else phi
    x, w, c = _profile_grid()
    mu = limit_profile().abs_a1p
    inner = (f(x[:, None] + x[None, :]) - f(x)[:, None]) @ (w * c)
    lhs = 2.0 * mu * float(np.sum(w * x * c * inner))
    rhs = float(np.sum(w * x * x * (f(x) - f(np.zeros(1))[0]) * c))
    return lhs - rhs


def darling_louchard_residual(q: float) -> float:
    """Quadrature of int (1 - e^{-qy}) psi_ex(y^{3/2}) / sqrt(2 pi y^3) dy minus
    2^{1/3} (Ai'(0)/Ai(0) - Ai'(2^{1/3} q)/Ai(2^{1/3} q))."""
    q = float(q)
    if q < 0 or q > 20:
        raise DomainError("darling_louchard_residual: q must lie in [0, 20]")
    if q == 0.0:
        return 0.0

    def integrand(s):
        if s == 0.0:
            return 2.0 * q / math.sqrt(2.0 * math.pi)
        return 2.0 * (-math.expm1(-q * s * s)) * _psi_ex_any(s**3) / (math.sqrt(2.0 * math.pi) * s * s)

    lhs = 0.0
    for a, b in ((0.0, 1.0), (1.0, 2.0), (2.0, 4.0), (4.0, 8.0)):
        part, _ = quad(integrand, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        lhs += part
    c = 2.0 ** (1.0 / 3.0)
    rhs = c * (airy_log_derivative(0.0) - airy_log_derivative(c * q))
    return lhs - rhs


def tl1_integrand(z: float) -> float:
    """(1 - e^{|a_1'| z} psi_ex(sqrt(2) z^{3/2})) / (2 sqrt(pi) z^{3/2})."""
    mu = limit_profile().abs_a1p
    prod = math.exp(mu * z) * _psi_ex_any(math.sqrt(2.0) * z**1.5)
    return (1.0 - prod) / (2.0 * math.sqrt(math.pi) * z**1.5)


def tl1_check(z_max: float = 60.0) -> float:
    """int_0^inf (1 - e^{|a_1'| z} psi_ex(sqrt 2 z^{3/2})) dz / (2 sqrt(pi) z^{3/2})."""

    def integrand(s):
        if s == 0.0:
            return -limit_profile().abs_a1p / math.sqrt(math.pi)
        return tl1_integrand(s * s) * 2.0 * s

    total = 0.0
    s_max = math.sqrt(z_max)
    edges = [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, s_max]
    for a, b in zip(edges[:-1], edges[1:]):
        part, _ = quad(integrand, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += part
    # beyond z_max the product is below e^{-17 z_max}: only the 1/z^{3/2} part remains
    total += 1.0 / (math.sqrt(math.pi) * math.sqrt(z_max))
    return total


def _equfonc_kernel(q: float, s: float) -> float:
    mu = limit_profile().abs_a1p
    a_num = 0.5 * (q + s) - mu
    a_den = 0.5 * q - mu
    num = airy(a_num).value
    den = airy(a_den).value
    return mu * (ell(0.5 * (q + s)) - ell(0.5 * s)) * (num / den) ** 2


def _equfonc_s_max(q: float) -> float:
    # Ai^2 ratio is below 1e-40 once (q+s)/2 exceeds q/2 + 12
    return min(24.0 + 2.0, 2.0 * (58.0 + limit_profile().abs_a1p) - q)


def equfonc_kernel_mass(q: float) -> float:
    """int_0^inf h(q, s) ds."""
    s_max = _equfonc_s_max(q)
    val, _ = quad(lambda s: _equfonc_kernel(q, s), 0.0, s_max, epsabs=1e-14, epsrel=1e-11, limit=200)
    return val


def equfonc_residual(q: float) -> float:
    """1 - p(q) - int_0^inf p(s) h(q, s) ds with p(q) = ell'(q/2)."""
    q = float(q)
    if q <= 0 or q > 20:
        raise DomainError("equfonc_residual: q must lie in (0, 20]")

    def p(s):
        return ell_prime(0.5 * s)

    s_max = _equfonc_s_max(q)
    integral = 0.0
    for a, b in ((0.0, 2.0), (2.0, 6.0), (6.0, s_max)):
        part, _ = quad(lambda s: p(s) * _equfonc_kernel(q, s), a, b, epsabs=1e-14, epsrel=1e-11, limit=200)
        integral += part
    return 1.0 - p(q) - integral


def riccati_residual(q: float) -> float:
    """ell'(q) - (1 - q/|a_1'| + |a_1'| ell(q)^2), ell' by central difference."""
    mu = limit_profile().abs_a1p
    lq = ell(q)
    return ell_prime(q) - (1.0 - q / mu + mu * lq * lq)
