import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from coagfrag import equilibrium as eq
from coagfrag import limitlaws as ll
from coagfrag.errors import DomainError

A1P = 1.018792971647471


@pytest.fixture(scope="module")
def law():
    return ll.limit_particle_law(10_000)


def test_limit_law_examples(law):
    assert law.p[0] == 0.5
    assert law.p[1] == pytest.approx(0.125, rel=1e-15)
    assert law.p[2] == pytest.approx(0.0625, rel=1e-15)
    k = 10_000
    assert law.p[k - 1] * 2 * math.sqrt(math.pi) * k**1.5 == pytest.approx(1.0, abs=1e-3)


def test_limit_law_closed_form(law):
    for k in (1, 2, 5, 17, 60):
        exact = mp.mpf(2) / (mp.mpf(4) ** k * k) * mp.binomial(2 * k - 2, k - 1)
        assert law.p[k - 1] == pytest.approx(float(exact), rel=1e-13)


def test_limit_law_recursion(law):
    small = ll.limit_particle_law(400)
    assert np.max(ll.limit_law_recursion_residual(small)) <= 1e-14


@pytest.mark.parametrize("z", [0.25, 0.5, 0.9])
def test_generating_function(law, z):
    assert abs(ll.generating_function(law, z) - (1 - math.sqrt(1 - z))) <= 1e-10


def test_mass_deficit(law):
    deficit = 1 - float(np.sum(law.p))
    ref = 1 / math.sqrt(math.pi * 10_000)
    assert 0.8 * ref <= deficit <= 1.2 * ref


def test_l1_distance(law):
    d = [ll.l1_distance_to_limit(eq.equilibrium_state(n), law) for n in (10, 100, 1000)]
    assert d[2] < d[1] < d[0]
    assert ll.l1_distance_to_limit(law, law) == 0.0
    s = eq.equilibrium_state(30)
    assert ll.l1_distance_to_limit(s, law) >= abs(eq.particle_law(s)[0] - 0.5)


def test_ell_against_mpmath():
    mp.mp.dps = 25
    a1p = mp.airyaizero(1, derivative=1)
    for q in (0.1, 1.0, 2.0, 7.5):
        ref = -mp.airyai(q + a1p, 1) / (abs(a1p) * mp.airyai(q + a1p))
        assert ll.ell(q) == pytest.approx(float(ref), rel=1e-11)


def test_ell_examples():
    assert ll.ell(0.0) == 0.0
    assert abs(ll.riccati_residual(2.0)) <= 1e-8
    assert ll.ell_prime(0.0) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        ll.ell(-1.5)


def test_ell_as_laplace_functional():
    # l(q) = int (1 - e^{-qx}) c(x) dx, integrated from the profile directly
    q = 1.3
    f = lambda s: (1 - math.exp(-q * s * s)) * ll.profile_c(s * s) * 2 * s
    val = integrate.quad(f, 0, 1, limit=200)[0] + integrate.quad(f, 1, 8, limit=200)[0]
    assert val == pytest.approx(ll.ell(q), rel=1e-7)


def test_ell_increasing():
    qs = np.linspace(0, 10, 101)
    v = np.array([ll.ell(q) for q in qs])
    assert np.all(np.diff(v) > 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 10.0))
def test_riccati_property(q):
    assert abs(ll.riccati_residual(q)) <= 1e-8


def test_psi_ex_examples():
    assert ll.psi_ex(1e-4) == pytest.approx(1.0, abs=5e-3)
    assert ll.psi_ex(2.0) < ll.psi_ex(1.0) < ll.psi_ex(0.5)
    with pytest.raises(DomainError):
        ll.psi_ex(5e-5)


def test_psi_ex_against_mpmath_series():
    mp.mp.dps = 20
    for y in (0.3, 1.0, 3.0):
        s = mp.nsum(lambda j: mp.exp(-mp.cbrt(0.5) * abs(mp.airyaizero(int(j))) * mp.mpf(y) ** (mp.mpf(2) / 3)), [1, 400])
        ref = mp.sqrt(2 * mp.pi) * y * s
        assert ll.psi_ex(y) == pytest.approx(float(ref), rel=1e-9)


def test_psi_ex_mean_area():
    # -psi'(0) = E[B_ex] = sqrt(pi/8); checked from the series at small y
    h = 2e-3
    slope = (ll.psi_ex(h) - ll.psi_ex(2 * h)) / h
    second = ll.EXCURSION_AREA_SECOND_MOMENT
    assert slope == pytest.approx(math.sqrt(math.pi / 8) - 1.5 * h * second, abs=5e-4)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 30.0), st.floats(1e-3, 5.0))
def test_psi_ex_monotone_bounded(y, dy):
    a, b = ll.psi_ex(y), ll.psi_ex(y + dy)
    assert 0 < b < a < 1


def test_profile_c_examples():
    x = 0.01
    assert 0.99 <= ll.profile_c(x) * 2 * math.sqrt(math.pi) * A1P * x**1.5 <= 1.01
    lam1 = 2.338107410459767 - A1P
    assert ll.profile_c(10.0) * A1P * math.exp(lam1 * 10) == pytest.approx(1.0, abs=1e-3)
    assert ll.profile_c(1.0, "airy_sum") == pytest.approx(ll.profile_c(1.0, "excursion_form"), rel=1e-8)
    with pytest.raises(DomainError):
        ll.profile_c(0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 30.0))
def test_profile_methods_agree(x):
    assert ll.profile_c(x, "airy_sum") == pytest.approx(ll.profile_c(x, "excursion_form"), rel=1e-8)


def test_profile_c_against_mpmath():
    mp.mp.dps = 20
    a1p = abs(mp.airyaizero(1, derivative=1))
    for x in (0.3, 2.0):
        s = mp.nsum(lambda j: mp.exp(-(abs(mp.airyaizero(int(j))) - a1p) * x), [1, 300])
        assert ll.profile_c(x) == pytest.approx(float(s / a1p), rel=1e-9)


def test_profile_array_matches_scalar():
    xs = np.geomspace(1e-3, 40, 57)
    arr = ll.profile_c_array(xs)
    assert np.allclose(arr, [ll.profile_c(x) for x in xs], rtol=1e-12, atol=0)


def test_profile_mass_and_cdf():
    assert ll.profile_moment(0) == pytest.approx(1.0, abs=1e-8)
    assert ll.profile_cdf(1e6) == pytest.approx(1.0, abs=1e-8)
    # direct integral of x c(x) against the closed-form cdf
    f = lambda s: s * s * ll.profile_c(s * s) * 2 * s
    part = integrate.quad(f, 0, 1, limit=200)[0] + integrate.quad(f, 1, math.sqrt(2.0), limit=200)[0]
    assert part == pytest.approx(ll.profile_cdf(2.0), rel=1e-8)


def test_moments():
    assert ll.profile_moment(0) == pytest.approx(1.0, abs=1e-8)
    assert ll.profile_moment(1) == pytest.approx(1 / A1P, abs=1e-6)
    assert ll.profile_moment(2) == pytest.approx(2 * A1P, abs=1e-6)
    rec = ll.moment_recursion(12)
    for i in range(13):
        assert rec[i] == pytest.approx(ll.profile_moment(i), rel=1e-6)
        assert rec[i] <= (2 * A1P) ** i * math.factorial(i) * (1 + 1e-12)


def test_moment_by_quadrature():
    f = lambda s: s**4 * ll.profile_c(s * s) * 2 * s  # x^2 c(x)
    val = integrate.quad(f, 0, 1, limit=200)[0] + integrate.quad(f, 1, 9, limit=200)[0]
    assert val == pytest.approx(ll.profile_moment(1), rel=1e-8)


def test_eqlim():
    assert ll.eqlim_residual("const") == 0.0
    assert abs(ll.eqlim_residual("linear")) <= 1e-6
    assert abs(ll.eqlim_residual("exp_decay")) <= 1e-6
    assert abs(ll.eqlim_residual("quadratic")) <= 1e-6
    assert abs(ll.eqlim_residual(lambda x: np.exp(-0.3 * x))) <= 1e-6


@pytest.mark.parametrize("q", [0.0, 0.3, 1.0, 4.0, 12.0, 20.0])
def test_darling_louchard(q):
    assert abs(ll.darling_louchard_residual(q)) <= 1e-5


def test_tl1():
    assert abs(ll.tl1_check()) <= 1e-4
    assert ll.tl1_integrand(0.01) < 0
    z = 40.0
    assert ll.tl1_integrand(z) * 2 * math.sqrt(math.pi) * z**1.5 == pytest.approx(1.0, abs=1e-3)


def test_equfonc():
    assert abs(ll.equfonc_residual(1e-3)) <= 1e-4
    assert abs(ll.equfonc_residual(1.0)) <= 1e-5
    assert abs(ll.equfonc_residual(5.0)) <= 1e-5
    assert 0 < ll.equfonc_kernel_mass(1.0) < 1


def test_limit_profile_invariants():
    prof = ll.limit_profile()
    lam = np.asarray(prof.lam)
    assert lam[0] > 0 and np.all(np.diff(lam) > 0)
    assert prof.abs_a1p == pytest.approx(A1P, rel=1e-14)
