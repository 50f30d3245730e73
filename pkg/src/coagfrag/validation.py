"""Acceptance checks with pinned tolerances.

Each check returns a Criterion record; ``run_suite`` collects them into a
report. Analytic checks use no randomness; simulation checks take a seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import continuum as cont
from . import equilibrium as eq
from . import limitlaws as ll
from . import treesim as ts

__all__ = ["Criterion", "ValidationReport", "CHECKS", "ANALYTIC", "SIMULATION", "run_check", "run_suite"]


@dataclass
class Criterion:
    id: str
    description: str
    measured: dict
    tolerance: dict
    passed: bool
    runtime_seconds: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.id} {self.description}: {vals} ({self.runtime_seconds:.1f}s)"


@dataclass
class ValidationReport:
    suite: str
    seed: int
    criteria: list[Criterion] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "passed": self.passed, "criteria": [asdict(c) for c in self.criteria]}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _floats(xs) -> list[float]:
    return [float(x) for x in xs]


# ---------------------------------------------------------------------------
# analytic


def check_qn_asymptotics(seed=None) -> Criterion:
    mu = ll.limit_profile().abs_a1p
    ns = (100, 1000, 10000)
    v = [n ** (2.0 / 3.0) * (2.0 * eq.solve_qn(n)[0] - 1.0) for n in ns]
    rel = abs(v[-1] - mu) / mu
    ok = v[0] < v[1] < v[2] < mu and rel <= 0.05
    return Criterion("C1", "n^{2/3}(2q_n-1) increases to |a1'|", {"values": _floats(v), "rel_gap_1e4": rel}, {"rel_gap_1e4": 0.05}, ok)


def check_moment_asymptotics(seed=None) -> Criterion:
    mu = ll.limit_profile().abs_a1p

    def ratios(n):
        s = eq.equilibrium_state(n)
        return n ** (1.0 / 3.0) * mu * s.m0, mu * s.m2 / n ** (2.0 / 3.0)

    a4, b4 = ratios(10000)
    a2, b2 = ratios(100)
    ok = 0.95 <= a4 <= 1.05 and 0.95 <= b4 <= 1.05 and abs(a4 - 1) < abs(a2 - 1) and abs(b4 - 1) < abs(b2 - 1)
    return Criterion(
        "C2",
        "m0 and m2 asymptotics at n=1e4",
        {"m0_ratio_1e4": a4, "m2_ratio_1e4": b4, "m0_ratio_1e2": a2, "m2_ratio_1e2": b2},
        {"band": [0.95, 1.05]},
        ok,
    )


def check_particle_limit(seed=None) -> Criterion:
    law = ll.limit_particle_law(10000)
    d = [ll.l1_distance_to_limit(eq.equilibrium_state(n), law, k_max=200, tails=False) for n in (10, 100, 1000)]
    res = float(np.max(ll.limit_law_recursion_residual(law)))
    tail = float(law.p[-1] * 2.0 * math.sqrt(math.pi) * 10000**1.5)
    ok = d[0] > d[1] > d[2] and res <= 1e-14 and 0.999 <= tail <= 1.001
    return Criterion(
        "C3",
        "p_k^n -> p_k, Catalan law recursion and tail",
        {"l1_200": _floats(d), "recursion_residual": res, "tail_ratio_1e4": tail},
        {"recursion_residual": 1e-14, "tail_ratio": [0.999, 1.001]},
        ok,
    )


def sizebiased_cdf_distance(n: int) -> float:
    """sup_x |sum_{k <= x n^{2/3}} k c_k^n - int_0^x s c(s) ds|."""
    s = eq.equilibrium_state(n)
    w = s.k * s.c
    F = np.cumsum(w)
    x = s.k / n ** (2.0 / 3.0)
    G = ll.profile_cdf_fast(x)
    below = np.concatenate([[0.0], F[:-1]])
    d = max(float(np.max(np.abs(F - G))), float(np.max(np.abs(below - G))))
    # beyond K the discrete law has at most its certified tail left
    return max(d, abs(1.0 - F[-1]) + abs(1.0 - G[-1]))


def check_profile_scaling(seed=None) -> Criterion:
    d4 = sizebiased_cdf_distance(10000)
    d2 = sizebiased_cdf_distance(100)
    ok = d4 <= 0.05 and d4 < d2
    return Criterion("C4", "rescaled size-biased law -> x c(x) dx", {"sup_1e4": d4, "sup_1e2": d2}, {"sup_1e4": 0.05}, ok)


def check_profile_identities(seed=None) -> Criterion:
    ric = max(abs(ll.riccati_residual(q)) for q in np.linspace(0.0, 5.0, 50))
    mass = abs(ll.profile_moment(0) - 1.0)
    xs = np.geomspace(ll.X_SWITCH, 30.0, 60)
    dual = max(abs(ll.profile_c(x, "airy_sum") / ll.profile_c(x, "excursion_form") - 1.0) for x in xs)
    ok = ric <= 1e-8 and mass <= 1e-8 and dual <= 1e-8
    return Criterion(
        "C5",
        "Riccati equation, total mass, dual forms of c",
        {"riccati_max": ric, "mass_error": mass, "dual_rel_max": dual},
        {"riccati_max": 1e-8, "mass_error": 1e-8, "dual_rel_max": 1e-8},
        ok,
    )


def check_moments(seed=None) -> Criterion:
    rec = ll.moment_recursion(6)
    series = np.array([ll.profile_moment(i) for i in range(7)])
    rel = float(np.max(np.abs(rec / series - 1.0)))
    m1, m2 = series[1], series[2]
    ok = rel <= 1e-6 and abs(m1 - 0.98155) <= 1e-4 and abs(m2 - 2.03759) <= 1e-4
    return Criterion("C6", "moment recursion vs Airy series", {"rel_max": rel, "M1": float(m1), "M2": float(m2)}, {"rel_max": 1e-6, "M1_M2_abs": 1e-4}, ok)


def check_integral_identities(seed=None) -> Criterion:
    tl1 = ll.tl1_check()
    dl = [ll.darling_louchard_residual(q) for q in (1.0, 4.0)]
    el = [ll.eqlim_residual(p) for p in ("linear", "exp_decay")]
    ef = [ll.equfonc_residual(q) for q in (0.5, 1.0, 2.0)]
    ok = abs(tl1) <= 1e-4 and max(map(abs, dl)) <= 1e-5 and max(map(abs, el)) <= 1e-6 and max(map(abs, ef)) <= 1e-5
    return Criterion(
        "C7",
        "tl1, Darling-Louchard, eqlim, equfonc identities",
        {"tl1": tl1, "darling_louchard": _floats(dl), "eqlim": _floats(el), "equfonc": _floats(ef)},
        {"tl1": 1e-4, "darling_louchard": 1e-5, "eqlim": 1e-6, "equfonc": 1e-5},
        ok,
    )


def check_integrator(seed=None) -> Criterion:
    K = 200
    t = np.linspace(0.0, 1.0, 21)
    tr = eq.cfn_evolve(math.inf, [1.0], K, 1.0, rtol=1e-10, t_eval=t)
    k = np.arange(1, K + 1)
    exact = (1.0 - np.exp(-t[:, None])) ** (k - 1) * np.exp(-2.0 * t[:, None])
    coag = float(np.max(np.abs(tr.c - exact)))
    c0 = np.zeros(16)
    c0[3] = 0.25
    tf = eq.cfn_evolve(5, c0, 16, 2.0, rtol=1e-11, coagulation=False)
    frag = abs(float(tf.c[-1, 3]) - 0.25 * math.exp(-3.0 * 2.0 / 5.0))
    st = eq.equilibrium_state(10)
    dc, _ = eq.cfn_rhs(st.c[:400], 10)
    rhs = float(np.max(np.abs(dc)))
    ok = coag <= 1e-6 and frag <= 1e-8 and rhs <= 1e-8
    return Criterion(
        "C13",
        "truncated ODE against closed forms and the fixed point",
        {"coagulation_max_error": coag, "fragmentation_error": frag, "equilibrium_rhs": rhs},
        {"coagulation_max_error": 1e-6, "fragmentation_error": 1e-8, "equilibrium_rhs": 1e-8},
        ok,
    )


# ---------------------------------------------------------------------------
# simulation

TREE_SAMPLES = 200_000
TREE_K_MAX = 2000


def _tree_tv(n: int, size_biased: bool, seed: int, N: int = TREE_SAMPLES) -> tuple[float, float]:
    s = eq.equilibrium_state(n)
    exact = eq.sizebiased_law(s) if size_biased else eq.particle_law(s)
    emp = ts.empirical_law(ts.PrunedTreeSampler(n, size_biased=size_biased), N, TREE_K_MAX, seed=seed)
    return ts.tv_distance(emp, exact), emp.censored / emp.N


def check_pruned_gw(seed: int = 0) -> Criterion:
    res = [_tree_tv(n, False, seed) for n in (1, 5, 20)]
    tv = [r[0] for r in res]
    cens = max(r[1] for r in res)
    ok = max(tv) <= 0.02
    return Criterion("C8", "pruned BCGWT leaf count ~ p_k^n", {"tv": _floats(tv), "censored_fraction": cens}, {"tv": 0.02}, ok, seed=seed)


def check_pruned_sbgw(seed: int = 0) -> Criterion:
    res = [_tree_tv(n, True, seed) for n in (1, 5, 20)]
    tv = [r[0] for r in res]
    cens = max(r[1] for r in res)
    ok = max(tv) <= 0.03 and cens < 1e-3
    return Criterion("C9", "pruned size-biased BCGWT leaf count ~ k c_k^n", {"tv": _floats(tv), "censored_fraction": cens}, {"tv": 0.03, "censored_fraction": 1e-3}, ok, seed=seed)


def check_excursion(seed: int = 0) -> Criterion:
    areas = cont.excursion_areas(100_000, 2**14, seed=seed)
    gaps, limits = [], []
    for y in (0.5, 1.0, 2.0):
        est, se = cont.psi_ex_mc(y, areas=areas)
        gaps.append(abs(est - ll.psi_ex(y)))
        limits.append(3.0 * (se + 0.005))
    ok = all(g <= lim for g, lim in zip(gaps, limits))
    return Criterion("C10", "excursion-area Monte Carlo vs psi_ex series", {"abs_gap": _floats(gaps), "allowed": _floats(limits)}, {"rule": "3(se+0.005)"}, ok, seed=seed)


def check_gamma(seed: int = 0) -> Criterion:
    N = 10_000
    run = cont.sample_gammas(N, seed=seed)
    g = run.gamma[np.isfinite(run.gamma)] / 8.0
    ks = ts.ks_distance(g, ll.profile_cdf_fast)
    mean = float(g.mean())
    se = float(g.std(ddof=1) / math.sqrt(g.size))
    target = 1.0 / ll.limit_profile().abs_a1p
    fail = run.failures / N
    ok = ks <= 0.03 and abs(mean - target) <= 3.0 * se and fail < 1e-3
    return Criterion(
        "C11",
        "backbone game Gamma/8 ~ x c(x) dx",
        {"ks": ks, "mean": mean, "target": target, "stderr": se, "failure_rate": fail},
        {"ks": 0.03, "mean": "3 stderr", "failure_rate": 1e-3},
        ok,
        seed=seed,
    )


def check_diffusion(seed: int = 0) -> Criterion:
    alpha = 2.0 ** (1.0 / 3.0)
    grid = np.linspace(0.0, 5.0, 51)
    ident = max(abs(cont.psi_laplace_exponent(alpha, lam) - cont.beta_drift(alpha, lam)) for lam in grid)
    integ = [abs(cont.psi_laplace_integral(alpha, lam) / cont.psi_laplace_exponent(alpha, lam) - 1.0) for lam in (0.25, 1.0, 4.0)]
    target = math.exp(-0.25 * cont.psi_laplace_exponent(alpha, 1.0))
    est, se = cont.simulate_inverse_local_time(cont.DiffusionConfig(alpha=alpha, dt=1e-4), 1.0, 0.25, N=10_000, seed=seed)
    rel = abs(est - target) / target
    ok = ident == 0.0 and max(integ) <= 1e-3 and rel <= 0.10
    return Criterion(
        "C12",
        "Airy-drift diffusion: psi = beta and inverse local time",
        {"identity_max_gap": ident, "integral_rel": _floats(integ), "sde_estimate": est, "target": target, "sde_rel_gap": rel},
        {"integral_rel": 1e-3, "sde_rel_gap": 0.10},
        ok,
        seed=seed,
    )


CHECKS: dict[str, Callable[..., Criterion]] = {
    "C1": check_qn_asymptotics,
    "C2": check_moment_asymptotics,
    "C3": check_particle_limit,
    "C4": check_profile_scaling,
    "C5": check_profile_identities,
    "C6": check_moments,
    "C7": check_integral_identities,
    "C8": check_pruned_gw,
    "C9": check_pruned_sbgw,
    "C10": check_excursion,
    "C11": check_gamma,
    "C12": check_diffusion,
    "C13": check_integrator,
}
ANALYTIC = ("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C13")
SIMULATION = ("C8", "C9", "C10", "C11", "C12")


def run_check(cid: str, seed: int = 0) -> Criterion:
    t0 = time.perf_counter()
    fn = CHECKS[cid]
    rec = fn(seed) if cid in SIMULATION else fn()
    rec.runtime_seconds = time.perf_counter() - t0
    return rec


def run_suite(suite: str = "all", seed: int = 0, progress: Callable[[Criterion], None] | None = None) -> ValidationReport:
    ids = {"analytic": ANALYTIC, "simulation": SIMULATION, "all": ANALYTIC + SIMULATION}[suite]
    report = ValidationReport(suite, seed)
    for cid in sorted(ids, key=lambda s: int(s[1:])):
        rec = run_check(cid, seed)
        report.criteria.append(rec)
        if progress is not None:
            progress(rec)
    return report
