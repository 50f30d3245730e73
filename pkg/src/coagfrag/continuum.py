"""Monte Carlo for the continuum objects.

* Brownian excursion area by Vervaat rotation of a discretized bridge,
  giving an independent estimate of psi_ex.
* The mass measure n_inf of a pruned continuum tree, in two forms.
* The backbone pruning game whose output Gamma satisfies Gamma/8 ~ x c(x) dx.
* The diffusion dX = dW - beta(X) dt with Airy drift, and the Laplace
  transform of the inverse of its local time at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, DomainError
from .limitlaws import _c_excursion, _psi_ex_any, limit_profile, profile_c, profile_c_array, profile_cdf
from .rng import STREAM_IDS, exponential, kernel_state, substream, uniform
from .specfun import airy_log_derivative

__all__ = [
    "ExcursionPath",
    "BackboneMark",
    "GammaSamplerConfig",
    "GammaRun",
    "DiffusionConfig",
    "sample_excursion",
    "excursion_area",
    "excursion_areas",
    "psi_ex_mc",
    "n_inf_density",
    "n_inf_density_excursion",
    "n_inf_small_mass_moment",
    "sample_gamma",
    "sample_gammas",
    "profile_cdf",
    "beta_drift",
    "psi_laplace_exponent",
    "psi_laplace_integral",
    "simulate_inverse_local_time",
    "levy_laplace_quadrature",
    "discrete_continuum_gap",
]


# ---------------------------------------------------------------------------
# Brownian excursion


@dataclass(frozen=True)
class ExcursionPath:
    m: int
    values: np.ndarray  # e_0..e_m


def _check_steps(m: int) -> int:
    m = int(m)
    if m < 256 or m & (m - 1):
        raise DomainError("m must be a power of two, at least 256")
    return m


def sample_excursion(m: int, rng: np.random.Generator) -> ExcursionPath:
    """Gaussian walk -> bridge by linear correction -> rotation at the argmin."""
    m = _check_steps(m)
    walk = np.concatenate([[0.0], np.cumsum(rng.standard_normal(m))]) / math.sqrt(m)
    bridge = walk - np.arange(m + 1) / m * walk[-1]
    k = int(np.argmin(bridge[:m]))
    e = np.empty(m + 1)
    e[:m] = np.roll(bridge[:m], -k) - bridge[k]
    e[m] = 0.0
    e[0] = 0.0
    return ExcursionPath(m, e)


def excursion_area(path: ExcursionPath) -> float:
    """Trapezoidal integral of the path over [0, 1]."""
    v = path.values
    return float((v.sum() - 0.5 * (v[0] + v[-1])) / path.m)


@nb.njit(cache=True)
def _normal_pair(s):
    r = math.sqrt(-2.0 * math.log(uniform(s)))
    t = 2.0 * math.pi * uniform(s)
    return r * math.cos(t), r * math.sin(t)


@nb.njit(cache=True, nogil=True)
def _area_kernel(m, seed, stream, start, count):
    out = np.empty(count)
    w = np.empty(m + 1)
    scale = 1.0 / math.sqrt(m)
    for i in range(count):
        s = kernel_state(seed, stream, start + i)
        w[0] = 0.0
        for j in range(0, m, 2):
            a, b = _normal_pair(s)
            w[j + 1] = w[j] + a * scale
            w[j + 2] = w[j + 1] + b * scale
        end = w[m]
        total = 0.0
        low = 0.0
        for j in range(m):
            b = w[j] - end * j / m
            total += b
            if b < low:
                low = b
        # the rotation shifts the path by its minimum and keeps the trapezoid sum
        out[i] = total / m - low
    return out


def excursion_areas(N: int, m: int = 2**14, seed: int = 0, start: int = 0) -> np.ndarray:
    m = _check_steps(m)
    return _area_kernel(m, np.uint64(seed), np.uint64(STREAM_IDS["excursion"]), np.uint64(start), int(N))


def psi_ex_mc(y: float, N: int = 10**5, m: int = 2**14, seed: int = 0, areas: np.ndarray | None = None) -> tuple[float, float]:
    """Monte Carlo mean of exp(-y * area) and its standard error."""
    if y < 0:
        raise DomainError("y must be nonnegative")
    if y == 0:
        return 1.0, 0.0
    if areas is None:
        if N < 1000:
            raise DomainError("N must be at least 1000")
        areas = excursion_areas(N, m, seed)
    v = np.exp(-y * areas)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


# ---------------------------------------------------------------------------
# mass measure of a pruned continuum tree


def n_inf_density(u: float) -> float:
    """(|a_1'|/16) c(u/8)."""
    if not u > 0:
        raise DomainError("u must be positive")
    mu = limit_profile().abs_a1p
    return mu / 16.0 * profile_c(u / 8.0)


def n_inf_density_excursion(u: float) -> float:
    """e^{|a_1'| u/8} psi_ex(u^{3/2}/16) / sqrt(2 pi u^3)."""
    if not u > 0:
        raise DomainError("u must be positive")
    mu = limit_profile().abs_a1p
    return math.exp(mu * u / 8.0) * _psi_ex_any(u**1.5 / 16.0) / math.sqrt(2.0 * math.pi * u**3)


def n_inf_small_mass_moment(u_eps: float) -> float:
    """int_0^{u_eps} u n_inf(du), by quadrature in u = s^2."""
    mu = limit_profile().abs_a1p

    def f(s):
        if s == 0.0:
            return 2.0 / math.sqrt(2.0 * math.pi)
        u = s * s
        return u * (mu / 16.0) * _c_excursion(u / 8.0) * 2.0 * s

    val, _ = quad(f, 0.0, math.sqrt(u_eps), epsabs=0.0, epsrel=1e-12)
    return val


@lru_cache(maxsize=8)
def _mass_table(u_eps: float, u_max: float = 400.0, points: int = 6001):
    """Cumulative n_inf mass on a log grid of [u_eps, u_max], for inverse-CDF
    sampling; the mass beyond u_max is below 1e-28 and is dropped."""
    logu = np.linspace(math.log(u_eps), math.log(u_max), points)
    u = np.exp(logu)
    mu = limit_profile().abs_a1p
    g = mu / 16.0 * profile_c_array(u / 8.0) * u  # density in log u
    h = logu[1] - logu[0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (g[1:] + g[:-1]))])
    # Simpson for the total, the trapezoid profile only shapes the table
    total = float(np.sum(h / 3.0 * (g[0:-2:2] + 4.0 * g[1:-1:2] + g[2::2])))
    cum *= total / cum[-1]
    return logu, cum, total


@dataclass(frozen=True)
class BackboneMark:
    x: float
    u: float
    y: float

    @property
    def cut(self) -> float:
        return self.x - self.y


@dataclass(frozen=True)
class GammaSamplerConfig:
    u_eps: float = 1e-5
    window_init: float = 8.0
    window_max: float = 512.0
    compensation: bool = True

    def __post_init__(self):
        if not (0 < self.u_eps <= 0.01):
            raise ConfigError("u_eps must lie in (0, 0.01]")
        if not self.window_init >= 8:
            raise ConfigError("window_init must be >= 8")
        if not self.window_max >= self.window_init:
            raise ConfigError("window_max must be >= window_init")


@dataclass(frozen=True)
class GammaRun:
    gamma: np.ndarray  # nan for failures
    tau: np.ndarray
    doublings: np.ndarray
    failures: int


def _draw_marks(rng, lo, hi, rate, table):
    logu, cum, total = table
    k = rng.poisson(rate * (hi - lo))
    x = lo + (hi - lo) * rng.random(k)
    u = np.exp(np.interp(rng.random(k) * total, cum, logu))
    y = rng.exponential(16.0 / u)
    return x, u, y


def _insulated_start(x, cut):
    """Sweep value right after the lowest insulating pair, or None.

    Among marks with positive cut sorted by position, a mark j whose cut is a
    new running maximum, with the previous maximum i satisfying x_i < cut_j,
    forces the sweep from infinity through cut_j and then to cut_i whatever
    lies above x_j.
    """
    keep = cut > 0
    xs = x[keep]
    cs = cut[keep]
    order = np.argsort(xs)
    xs, cs = xs[order], cs[order]
    if xs.size < 2:
        return None, xs, cs
    run = np.maximum.accumulate(cs)
    prev = np.concatenate([[-np.inf], run[:-1]])
    is_record = cs > prev
    rec_idx = np.maximum.accumulate(np.where(is_record, np.arange(cs.size), 0))
    j = np.flatnonzero(is_record[1:]) + 1
    i = rec_idx[j - 1]
    ok = xs[i] < cs[j]
    if not np.any(ok):
        return None, xs, cs
    first = int(np.flatnonzero(ok)[0])
    return float(cs[i[first]]), xs, cs


def _sweep(R, xs, cs):
    run = np.maximum.accumulate(cs) if cs.size else cs
    while True:
        idx = int(np.searchsorted(xs, R, side="left"))
        if idx == 0:
            return R
        R = float(run[idx - 1])


def sample_gamma(config: GammaSamplerConfig, rng: np.random.Generator, details: bool = False):
    """One draw of Gamma from the backbone game, or None if the window limit
    is reached without an insulating pair."""
    table = _mass_table(config.u_eps)
    rate = 2.0 * table[2]
    A = config.window_init
    x, u, y = _draw_marks(rng, 0.0, A, rate, table)
    doublings = 0
    while True:
        start, xs, cs = _insulated_start(x, x - y)
        if start is not None:
            break
        if 2 * A > config.window_max:
            return None
        x2, u2, y2 = _draw_marks(rng, A, 2 * A, rate, table)
        x, u, y = np.concatenate([x, x2]), np.concatenate([u, u2]), np.concatenate([y, y2])
        A *= 2
        doublings += 1
    tau = _sweep(start, xs, cs)
    gamma = float(u[x < tau].sum())
    if config.compensation:
        gamma += 2.0 * tau * n_inf_small_mass_moment(config.u_eps)
    if details:
        return gamma, tau, doublings
    return gamma


def sample_gammas(N: int, config: GammaSamplerConfig | None = None, seed: int = 0, start: int = 0) -> GammaRun:
    config = config or GammaSamplerConfig()
    g = np.full(N, np.nan)
    t = np.full(N, np.nan)
    d = np.zeros(N, dtype=np.int64)
    fails = 0
    for i in range(N):
        r = sample_gamma(config, substream(seed, STREAM_IDS["gamma"], start + i), details=True)
        if r is None:
            fails += 1
            continue
        g[i], t[i], d[i] = r
    return GammaRun(g, t, d, fails)


# ---------------------------------------------------------------------------
# Airy-drift diffusion


def beta_drift(alpha: float, x: float) -> float:
    """-sign(x) alpha Ai'(alpha|x| + a_1') / Ai(alpha|x| + a_1')."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if x == 0:
        return 0.0
    mu = limit_profile().abs_a1p
    val = -alpha * airy_log_derivative(alpha * abs(x) - mu)
    return val if x > 0 else -val


def psi_laplace_exponent(alpha: float, lam: float) -> float:
    """beta(2 lambda / alpha^3)."""
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    return beta_drift(alpha, 2.0 * lam / alpha**3)


def psi_laplace_integral(alpha: float, lam: float) -> float:
    """int (1 - e^{-lam u}) e^{alpha^2 |a_1'| u/2} psi_ex(alpha^3 u^{3/2}/2) du / sqrt(2 pi u^3)."""
    mu = limit_profile().abs_a1p
    a2, a3 = alpha * alpha, alpha**3

    def f(s):
        if s == 0.0:
            return 2.0 * lam / math.sqrt(2.0 * math.pi)
        u = s * s
        return 2.0 * (-math.expm1(-lam * u)) * math.exp(a2 * mu * u / 2.0) * _psi_ex_any(a3 * s**3 / 2.0) / (math.sqrt(2.0 * math.pi) * u)

    # the integrand decays like exp(-alpha^2 (|a_1| - |a_1'|) s^2 / 2)
    s_max = math.sqrt(2.0 * 80.0 / (a2 * (limit_profile().lam[0])))
    total = 0.0
    edges = np.linspace(0.0, s_max, 9)
    for a, b in zip(edges[:-1], edges[1:]):
        part, _ = quad(f, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += part
    return total


@dataclass(frozen=True)
class DiffusionConfig:
    alpha: float = 2.0 ** (1.0 / 3.0)
    dt: float = 1e-4
    estimator: str = "tanaka"
    horizon: float = 50.0
    table_max: float = 12.0
    table_points: int = 24001

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not (0 < self.dt <= 0.1):
            raise ConfigError("dt must lie in (0, 0.1]")
        if self.estimator != "tanaka":
            raise ConfigError("only the Tanaka estimator is available")


@lru_cache(maxsize=8)
def _beta_table(alpha: float, x_max: float, points: int) -> np.ndarray:
    xs = np.linspace(0.0, x_max, points)
    return np.array([beta_drift(alpha, float(v)) for v in xs])


@nb.njit(cache=True, nogil=True)
def _local_time_kernel(table, x_max, dt, x_level, horizon, seed, stream, start, count):
    taus = np.empty(count)
    h = x_max / (table.size - 1)
    sq = math.sqrt(dt)
    max_steps = int(horizon / dt)
    for i in range(count):
        s = kernel_state(seed, stream, start + i)
        X = 0.0
        integral = 0.0
        steps = 0
        tau = np.inf
        spare = 0.0
        have = False
        while steps < max_steps:
            ax = abs(X)
            if ax >= x_max:
                b = table[-1] + (table[-1] - table[-2]) / h * (ax - x_max)
            else:
                pos = ax / h
                k = int(pos)
                fr = pos - k
                b = table[k] + fr * (table[k + 1] - table[k])
            if X < 0:
                b = -b
            if have:
                z = spare
                have = False
            else:
                z, spare = _normal_pair(s)
                have = True
            dX = sq * z - b * dt
            sgn = 1.0 if X > 0 else (-1.0 if X < 0 else 0.0)
            integral += sgn * dX
            X += dX
            steps += 1
            if abs(X) - integral >= x_level:
                tau = steps * dt
                break
        taus[i] = tau
    return taus


def simulate_inverse_local_time(
    config: DiffusionConfig,
    lam: float,
    x: float,
    N: int = 10**4,
    seed: int = 0,
    return_times: bool = False,
):
    """Monte Carlo estimate of E[exp(-lam tau_x)] and its standard error."""
    if not (0 < x <= 1):
        raise DomainError("x must lie in (0, 1]")
    if not (0 <= lam <= 4):
        raise DomainError("lambda must lie in [0, 4]")
    table = _beta_table(config.alpha, config.table_max, config.table_points)
    taus = _local_time_kernel(
        table, config.table_max, config.dt, x, config.horizon,
        np.uint64(seed), np.uint64(STREAM_IDS["diffusion"]), np.uint64(0), int(N),
    )
    unfinished = int(np.sum(~np.isfinite(taus)))
    if unfinished > 0.01 * N:
        raise ConfigError(f"horizon exhausted on {unfinished} of {N} paths")
    if lam == 0:
        est, err = 1.0, 0.0
    else:
        v = np.exp(-lam * taus)  # unfinished paths contribute at most e^{-lam horizon}
        est, err = float(v.mean()), float(v.std(ddof=1) / math.sqrt(N))
    return (est, err, taus) if return_times else (est, err)


# ---------------------------------------------------------------------------
# small checks


def levy_laplace_quadrature(q: float) -> float:
    """int_0^inf (1 - e^{-qu}) sqrt(2/(pi u^3)) du by quadrature (exact: 2 sqrt(2q))."""

    def f(s):
        # u = s^2 on [0, 1]
        if s == 0.0:
            return 2.0 * q * math.sqrt(2.0 / math.pi)
        return 2.0 * (-math.expm1(-q * s * s)) * math.sqrt(2.0 / math.pi) / (s * s)

    def g(v):
        # u = 1/v^2 on [1, inf)
        if v == 0.0:
            return 2.0 * math.sqrt(2.0 / math.pi)
        return 2.0 * (-math.expm1(-q / (v * v))) * math.sqrt(2.0 / math.pi)

    a, _ = quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
    b, _ = quad(g, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, points=[min(1.0, 1.0 / math.sqrt(q))])
    return a + b


def discrete_continuum_gap(q: float, x: float, p: float) -> float:
    """Relative gap between e^{-4q/p}(1 - sqrt(1 - e^{-8q/p}))^{floor(sqrt(p) x)}
    and its limit e^{-2x sqrt(2q)}."""
    k = math.floor(math.sqrt(p) * x)
    inner = -math.expm1(-8.0 * q / p)
    log_disc = -4.0 * q / p + k * math.log1p(-math.sqrt(inner))
    log_lim = -2.0 * x * math.sqrt(2.0 * q)
    return abs(math.expm1(log_disc - log_lim))
