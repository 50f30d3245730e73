"""Exact equilibrium of the mean-field coagulation-fragmentation system.

For fixed n the equilibrium concentrations are

    c_k = alpha_k q^{k-1} / f'(q),   f(x) = sum_k alpha_k x^k,

where alpha_1 = 1, (2 + (k-1)/n) alpha_k = sum_{i<k} alpha_i alpha_{k-i} and q
is the root of f(q) = 1 below the radius of convergence r_n. The coefficients
are never formed directly: the recursion is run on beta_k = alpha_k x^k, which
obeys the same recursion with beta_1 = x. Running it once at x = r_n gives
terms of order one (f has a simple pole at r_n), and any q < r_n is then
reached by the geometric factor (q / r_n)^k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericError, ResourceError
from .specfun import airy_prime_zero_first, bessel_first_zero, bessel_j_ratio

__all__ = [
    "AlphaPrefix",
    "EquilibriumState",
    "TruncatedTrajectory",
    "alpha_prefix",
    "radius",
    "f_eval",
    "solve_qn",
    "equilibrium_state",
    "particle_law",
    "sizebiased_law",
    "multiplicative_transform",
    "multiplicative_weak_form_residual",
    "weak_form_residual",
    "eq2_residual",
    "cfn_rhs",
    "cfn_evolve",
]

K_CAP = 10**7
_RATIO_WINDOW = 50


@dataclass(frozen=True)
class AlphaPrefix:
    n: int
    scale: float
    K: int
    values: np.ndarray  # beta_1..beta_K


@dataclass(frozen=True)
class EquilibriumState:
    n: int
    q_n: float
    fprime_qn: float
    r_n: float
    K: int
    c: np.ndarray  # c_1..c_K
    tail_mass_bound: float
    m0: float
    m1: float
    m2: float

    @property
    def k(self) -> np.ndarray:
        return np.arange(1, self.K + 1)


@dataclass(frozen=True)
class TruncatedTrajectory:
    n: float
    K: int
    t: np.ndarray
    c: np.ndarray  # shape (len(t), K)
    mass_leak: np.ndarray
    extra: dict = field(default_factory=dict)

    def mass(self) -> np.ndarray:
        return self.c @ np.arange(1, self.K + 1)


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    return int(n)


def _beta_recursion(n: int, x: float, K: int) -> np.ndarray:
    """beta[k] for k = 0..K (beta[0] = 0 is padding)."""
    b = np.zeros(K + 1)
    b[1] = x
    inv_n = 1.0 / n
    for k in range(2, K + 1):
        h = k // 2
        # sum_{i=1}^{k-1} b_i b_{k-i} folded around the middle
        s = 2.0 * np.dot(b[1 : h + 1], b[k - 1 : k - h - 1 : -1]) if h >= 1 else 0.0
        if k % 2 == 0:
            s -= b[h] * b[h]
        b[k] = s / (2.0 + (k - 1) * inv_n)
    return b


def alpha_prefix(n: int, x: float, K: int) -> AlphaPrefix:
    """Scaled coefficients beta_k = alpha_k^n x^k for k <= K."""
    n = _check_n(n)
    x = float(x)
    if not x > 0:
        raise DomainError("alpha_prefix: scale must be positive")
    if int(K) != K or K < 1 or K > K_CAP:
        raise DomainError("alpha_prefix: K must lie in [1, 1e7]")
    with np.errstate(over="raise", under="ignore", invalid="raise"):
        try:
            b = _beta_recursion(n, x, int(K))
        except FloatingPointError as exc:
            raise NumericError(f"beta overflow at scale {x}; use a smaller scale") from exc
    vals = b[1:]
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
        raise NumericError(f"beta values left binary64 range at scale {x}; choose a different scale")
    vals.setflags(write=False)
    return AlphaPrefix(n, x, int(K), vals)


@lru_cache(maxsize=256)
def radius(n: int) -> float:
    """Radius of convergence r_n = (j_{2n-1} / (2n))^2 / 2 of f_n."""
    n = _check_n(n)
    return 0.5 * (bessel_first_zero(2 * n - 1) / (2.0 * n)) ** 2


@lru_cache(maxsize=64)
def _radius_coeffs(n: int, K: int) -> np.ndarray:
    b = _beta_recursion(n, radius(n), K)[1:]
    b.setflags(write=False)
    return b


def _observed_ratio(t: np.ndarray) -> float:
    tail = t[-(_RATIO_WINDOW + 1) :]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = tail[1:] / tail[:-1]
    r = r[np.isfinite(r)]
    return float(r.max()) if r.size else 0.0


def _geometric_tail(t: np.ndarray) -> float:
    """Bound last * rho / (1 - rho) on the remainder of a positive series."""
    rho = _observed_ratio(t)
    if rho >= 1.0:
        return math.inf
    return float(t[-1]) * rho / (1.0 - rho)


def _powers(rho: float, K: int) -> np.ndarray:
    k = np.arange(1, K + 1)
    with np.errstate(under="ignore"):
        return np.exp(k * math.log(rho))


def _series_terms(n: int, rho: float, tol: float, stop_above: float = math.inf):
    """Terms beta_k(q) = b_k rho^k with enough K for a relative tail below tol.

    Returns (terms, tail_bound). If the partial sum already exceeds
    ``stop_above`` the growth stops early (positivity makes that certain).
    """
    K = 256
    while True:
        b = _radius_coeffs(n, K)
        t = b * _powers(rho, K)
        total = float(np.sum(t))
        tail = _geometric_tail(t)
        if tail <= tol * total or total > stop_above:
            return t, tail
        if K >= K_CAP:
            raise ResourceError(f"series for n={n} needs more than {K_CAP} terms")
        K = min(2 * K, K_CAP)


def f_eval(n: int, q: float, method: str = "series") -> float:
    """f_n(q) by the power series or by the Bessel closed form."""
    n = _check_n(n)
    q = float(q)
    r = radius(n)
    if q < 0 or q >= r:
        raise DomainError(f"f_eval: q={q} outside [0, r_n={r})")
    if q == 0.0:
        return 0.0
    if method == "series":
        t, _ = _series_terms(n, q / r, 1e-14)
        return float(np.sum(t))
    if method == "bessel":
        y = 2.0 * n * math.sqrt(2.0 * q)
        return math.sqrt(2.0 * q) * bessel_j_ratio(2 * n, y)
    raise DomainError(f"unknown method {method!r}")


def solve_qn(n: int, tol: float = 1e-13) -> tuple[float, float]:
    """Root q_n of f_n(q) = 1 and the series derivative f_n'(q_n)."""
    n = _check_n(n)
    if tol < 1e-14:
        raise DomainError("solve_qn: tol below 1e-14")
    r = radius(n)
    lo, hi = 0.25, 1.0 - 1e-12  # bracket in rho = q / r_n
    t, _ = _series_terms(n, lo, 1e-15)
    if float(np.sum(t)) >= 1.0:  # pragma: no cover - never observed
        raise NumericError("f_n(r_n/4) >= 1: bracket failure")
    abs_a1p = -airy_prime_zero_first()
    rho = min(max(0.5 * (1.0 + abs_a1p * n ** (-2.0 / 3.0)) / r, lo), 1.0 - 1e-9)
    for _ in range(200):
        t, _ = _series_terms(n, rho, 1e-16, stop_above=2.0)
        f = float(np.sum(t))
        if f > 2.0:
            hi = rho
            rho = 0.5 * (lo + hi)
            continue
        k = np.arange(1, t.size + 1)
        dfdrho = float(np.dot(k, t)) / rho
        F = f - 1.0
        if F < 0:
            lo = rho
        else:
            hi = rho
        if abs(F) <= 0.25 * tol:
            break
        step = F / dfdrho
        new = rho - step
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - rho) <= 2e-16 * rho:
            rho = new
            break
        rho = new
    else:  # pragma: no cover
        raise NumericError(f"solve_qn({n}) did not converge")
    t, _ = _series_terms(n, rho, 1e-16)
    k = np.arange(1, t.size + 1)
    q = rho * r
    fprime = float(np.dot(k, t)) / q
    return q, fprime


@lru_cache(maxsize=64)
def equilibrium_state(n: int, eps_tail: float = 1e-12) -> EquilibriumState:
    """The equilibrium (c_k^n) with a certified bound on the truncated mass."""
    n = _check_n(n)
    if eps_tail < 1e-12:
        raise DomainError("equilibrium_state: eps_tail below 1e-12")
    q, fprime = solve_qn(n)
    r = radius(n)
    rho = q / r
    K = 256
    while True:
        b = _radius_coeffs(n, K)
        beta = b * _powers(rho, K)
        kk = np.arange(1, K + 1, dtype=float)
        mass_terms = kk * beta / (q * fprime)
        tail = _geometric_tail(mass_terms)
        if tail <= eps_tail:
            break
        if K >= K_CAP:
            raise ResourceError("equilibrium_state: K cap reached; raise eps_tail")
        K = min(2 * K, K_CAP)
    # shrink K to the first index where the remaining bound already holds
    c = beta / (q * fprime)
    rev_tail = np.cumsum((kk * c)[::-1])[::-1]
    keep = int(np.argmax(rev_tail <= 0.5 * eps_tail)) if np.any(rev_tail <= 0.5 * eps_tail) else K
    K_final = max(min(K, keep + _RATIO_WINDOW + 1), 2 * _RATIO_WINDOW)
    K_final = min(K_final, K)
    c = c[:K_final].copy()
    kk = kk[:K_final]
    tail = _geometric_tail(kk * c)
    # allow for rounding in the pairwise sums as well
    tail_bound = tail + 64 * np.finfo(float).eps * math.sqrt(K_final)
    c.setflags(write=False)
    return EquilibriumState(
        n=n,
        q_n=q,
        fprime_qn=fprime,
        r_n=r,
        K=K_final,
        c=c,
        tail_mass_bound=float(tail_bound),
        m0=float(np.sum(c)),
        m1=float(np.dot(kk, c)),
        m2=float(np.dot(kk * kk, c)),
    )


def particle_law(state: EquilibriumState) -> np.ndarray:
    """p_k^n = c_k / m_0."""
    return state.c / state.m0


def particle_law_direct(state: EquilibriumState) -> np.ndarray:
    """p_k^n = alpha_k q_n^k, computed from the scaled coefficients."""
    b = _radius_coeffs(state.n, _pow2_at_least(state.K))[: state.K]
    return b * _powers(state.q_n / state.r_n, state.K)


def _pow2_at_least(K: int) -> int:
    p = 256
    while p < K:
        p *= 2
    return p


def sizebiased_law(state: EquilibriumState) -> np.ndarray:
    """Mass law of the cluster of a uniform atom: k c_k."""
    return state.k * state.c


def multiplicative_transform(state: EquilibriumState) -> np.ndarray:
    """d_k = p_k / k, an equilibrium with multiplicative coagulation kernel."""
    return particle_law(state) / state.k


def multiplicative_weak_form_residual(state: EquilibriumState, phi: Callable) -> float:
    """LHS - RHS of the multiplicative-kernel weak form for d_k = p_k/k.

        1/2 sum_{k,l} [phi(k+l) - phi(k) - phi(l)] k l d_k d_l
            = sum_k [phi(k) - k phi(1)] k (k-1) / (2n) d_k
    """
    d = multiplicative_transform(state)
    K = state.K
    k = state.k
    ph = np.asarray(phi(np.arange(1, 2 * K + 1)), dtype=float)
    kd = k * d
    conv = np.convolve(kd, kd)  # index m <-> size m + 2
    lhs = 0.5 * (float(np.dot(ph[1 : 2 * K], conv)) - 2.0 * float(np.sum(kd)) * float(np.dot(ph[:K], kd)))
    rhs = float(np.dot((ph[:K] - k * ph[0]) * k * (k - 1) / (2.0 * state.n), d))
    return lhs - rhs


def weak_form_residual(state: EquilibriumState, phi: Callable, form: str = "wf1") -> float:
    """LHS - RHS of the weak formulations of the equilibrium equations.

    wf1: (1/m0) sum_{k,l} [phi(k+l)-phi(k)-phi(l)] c_k c_l
            = (1/n) sum_{k>=2} [phi(k) - k phi(1)] (k-1) c_k
    wf2: (2/m0) sum_{k,l} [phi(k+l)-phi(k)] k c_k c_l
            = (1/n) sum_k [phi(k) - phi(1)] k (k-1) c_k
    ``phi`` is applied to an integer array 1..2K.
    """
    c = state.c
    K = state.K
    k = state.k
    m0 = state.m0
    ph = np.asarray(phi(np.arange(1, 2 * K + 1)), dtype=float)
    if form == "wf1":
        conv = np.convolve(c, c)
        lhs = (float(np.dot(ph[1 : 2 * K], conv)) - 2.0 * float(np.sum(c)) * float(np.dot(ph[:K], c))) / m0
        rhs = float(np.dot((ph[:K] - k * ph[0]) * (k - 1), c)) / state.n
    elif form == "wf2":
        kc = k * c
        conv = np.convolve(kc, c)
        lhs = 2.0 * (float(np.dot(ph[1 : 2 * K], conv)) - float(np.sum(c)) * float(np.dot(ph[:K], kc))) / m0
        rhs = float(np.dot((ph[:K] - ph[0]) * k * (k - 1), c)) / state.n
    else:
        raise DomainError(f"unknown weak form {form!r}")
    return lhs - rhs


def eq2_residual(state: EquilibriumState) -> np.ndarray:
    """Relative residual of (2 + (k-1)/n) c_k = (1/m0) sum_{i<k} c_i c_{k-i}."""
    c = state.c
    k = state.k
    gain = np.zeros_like(c)
    gain[1:] = np.convolve(c, c)[: state.K - 1] / state.m0
    # the k = 1 equation is the fragmentation balance, not a convolution
    gain[0] = (2.0 + 0.0) * c[0]
    lhs = (2.0 + (k - 1) / state.n) * c
    return np.abs(lhs - gain) / lhs


# ---------------------------------------------------------------------------
# time-dependent system


def cfn_rhs(
    c: np.ndarray,
    n: float,
    coagulation: bool = True,
    fragmentation: bool = True,
) -> tuple[np.ndarray, float]:
    """Right-hand side of the truncated system and the mass leak rate."""
    K = c.size
    k = np.arange(1, K + 1, dtype=float)
    dc = np.zeros(K)
    leak = 0.0
    if coagulation:
        m0 = float(np.sum(c))
        dc -= 2.0 * c
        if m0 > 0:
            conv = np.convolve(c, c)
            dc[1:] += conv[: K - 1] / m0
            sizes = np.arange(2, 2 * K + 1, dtype=float)
            leak = float(np.dot(sizes[K - 1 :], conv[K - 1 :])) / m0
    if fragmentation and math.isfinite(n):
        dc[0] += float(np.dot(k * (k - 1), c)) / n
        dc -= (k - 1) / n * c
    return dc, leak


def cfn_evolve(
    n: float,
    c0,
    K: int,
    t_end: float,
    rtol: float = 1e-10,
    *,
    atol: float | None = None,
    t_eval=None,
    coagulation: bool = True,
    fragmentation: bool = True,
) -> TruncatedTrajectory:
    """Integrate the truncated system on [0, t_end].

    ``n = math.inf`` switches fragmentation off. Mass produced above size K
    is routed to a leak accumulator instead of being reflected.
    """
    if not (n == math.inf or (n >= 1)):
        raise DomainError("n must be >= 1 or inf")
    K = int(K)
    if K < 16:
        raise DomainError("K must be at least 16")
    init = np.zeros(K)
    c0 = np.asarray(c0, dtype=float)
    if np.any(c0 < 0):
        raise DomainError("initial concentrations must be nonnegative")
    m = min(K, c0.size)
    init[:m] = c0[:m]
    kk = np.arange(1, K + 1, dtype=float)
    mass0 = float(np.dot(kk, init))
    if mass0 > 1.0 + 1e-9:
        raise DomainError("initial mass above 1")
    if atol is None:
        atol = rtol * 1e-3

    def rhs(_t, y):
        dc, leak = cfn_rhs(y[:K], n, coagulation, fragmentation)
        return np.append(dc, leak)

    sol = solve_ivp(
        rhs,
        (0.0, float(t_end)),
        np.append(init, 0.0),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success:
        t_reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise NumericError(f"integration stopped at t={t_reached}: {sol.message}")
    return TruncatedTrajectory(
        n=n,
        K=K,
        t=sol.t,
        c=sol.y[:K].T.copy(),
        mass_leak=sol.y[K].copy(),
        extra={"nfev": int(sol.nfev), "initial_mass": mass0},
    )
