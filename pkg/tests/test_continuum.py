import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polydet.continuum import (EULER_GAMMA, continuum_zeta_prime_zero, corner_term,
                               half_plane_defect, half_plane_defect_integral, kac_coefficients,
                               kac_remainder, rectangle_heat_trace, rectangle_heat_trace_direct,
                               rectangle_kac, rectangle_spectrum)
from polydet.geometry import summarize_geometry

# frozen output of continuum_zeta_prime_zero(1, 1); error bar 1e-8
UNIT_SQUARE_ZETA_PRIME = 0.6102456605288906


def test_kac_unit_square(square):
    k = kac_coefficients(summarize_geometry(square))
    assert k.a0 == pytest.approx(1 / (4 * math.pi))
    assert k.a1 == pytest.approx(-1 / (2 * math.sqrt(math.pi)))
    assert k.a2 == pytest.approx(0.25, abs=1e-15)
    assert rectangle_kac(1, 1) == pytest.approx(k)


def test_reflex_corner_term():
    assert corner_term(1.5 * math.pi) == pytest.approx(-5 / 144, abs=1e-15)


def test_l_shape_a2(l_shape):
    assert kac_coefficients(summarize_geometry(l_shape)).a2 == pytest.approx(5 / 18)


@pytest.mark.parametrize("L", [2, 3, 7])
def test_kac_homogeneity(l_shape, L):
    k1 = kac_coefficients(summarize_geometry(l_shape))
    kL = kac_coefficients(summarize_geometry(l_shape.scaled(L)))
    assert kL.a0 == pytest.approx(L * L * k1.a0)
    assert kL.a1 == pytest.approx(L * k1.a1)
    assert kL.a2 == pytest.approx(k1.a2)


def test_heat_trace_large_t():
    v = rectangle_heat_trace(1, 1, 10)
    assert 0 < v < 1e-85
    assert v == pytest.approx(math.exp(-20 * math.pi ** 2), rel=1e-12)


def test_kac_remainder_small():
    k = rectangle_kac(1, 1)
    t = 0.05
    tr = rectangle_heat_trace(1, 1, t)
    assert abs(tr - k.a0 / t - k.a1 / math.sqrt(t) - k.a2) < 1e-6


@pytest.mark.parametrize("a, b", [(1, 1), (1, 2), (0.7, 1.9)])
def test_direct_vs_poisson(a, b):
    t = 0.2
    assert rectangle_heat_trace_direct(a, b, t) == pytest.approx(rectangle_heat_trace(a, b, t),
                                                                 rel=0, abs=1e-12)


def test_kac_remainder_envelope():
    ts = np.linspace(0.01, 0.2, 40)
    ratios = [abs(kac_remainder(1, 1, t)) / math.exp(-1 / (5 * t)) for t in ts]
    C = max(ratios)
    assert 0 < C < 1
    assert all(r <= C for r in ratios)


def test_stable_remainder_matches_direct():
    for t in (0.05, 0.1, 0.2):
        k = rectangle_kac(1.3, 0.8)
        direct = rectangle_heat_trace_direct(1.3, 0.8, t) - k.a0 / t - k.a1 / math.sqrt(t) - k.a2
        assert kac_remainder(1.3, 0.8, t) == pytest.approx(direct, abs=1e-11)


def test_unit_square_zeta_frozen():
    z, err = continuum_zeta_prime_zero(1, 1)
    assert abs(z - UNIT_SQUARE_ZETA_PRIME) < 1e-8
    assert err < 1e-8


def test_rescaling_identity():
    z1, _ = continuum_zeta_prime_zero(1, 1)
    z2, _ = continuum_zeta_prime_zero(2, 2)
    assert abs(z2 - z1 - 0.5 * math.log(2)) < 1e-7


@settings(max_examples=8, deadline=None)
@given(a=st.floats(0.3, 3), b=st.floats(0.3, 3), c=st.floats(0.5, 4))
def test_rescaling_general(a, b, c):
    z1, _ = continuum_zeta_prime_zero(a, b)
    z2, _ = continuum_zeta_prime_zero(c * a, c * b)
    assert z2 - z1 == pytest.approx(0.5 * math.log(c), abs=1e-7)


def test_aspect_symmetry():
    assert continuum_zeta_prime_zero(1, 2) == continuum_zeta_prime_zero(2, 1)


def test_zeta_against_spectral_sum():
    # second route: above the window edge the trace comes from the explicit
    # eigenvalue list, not from the Poisson-switched theta sums
    from scipy.integrate import quad
    lam = rectangle_spectrum(1, 1, 4000).eigenvalues
    k = rectangle_kac(1, 1)
    cut = math.exp(-EULER_GAMMA)

    def upper(u):
        t = math.exp(u)
        return float(np.exp(-t * lam).sum())

    def lower(u):
        t = math.exp(u)
        return kac_remainder(1, 1, t) + 0.25 if t > cut else kac_remainder(1, 1, t)

    # on [e^-gamma, inf) F = Tr - a0/t - a1/sqrt(t); integrate Tr from the spectrum
    hi, _ = quad(upper, -EULER_GAMMA, 6, limit=200, epsabs=1e-13)
    hi -= k.a0 / cut + 2 * k.a1 / math.sqrt(cut)
    lo, _ = quad(lower, math.log(1 / 80), -EULER_GAMMA, limit=200, epsabs=1e-13)
    assert lo + hi == pytest.approx(UNIT_SQUARE_ZETA_PRIME, abs=1e-8)


def test_weyl_law():
    # the one-term ratio carries a -perimeter/sqrt(lambda) correction (4% at 1e4)
    lam = 1e4
    N = rectangle_spectrum(1, 1, lam).counting(lam)
    two_term = lam / (4 * math.pi) - math.sqrt(lam) / math.pi
    assert abs(N / two_term - 1) < 0.02
    lam = 1e6
    N = rectangle_spectrum(1, 1, lam).counting(lam)
    assert abs(N / (lam / (4 * math.pi)) - 1) < 0.02


def test_half_plane_defect():
    assert half_plane_defect(0, 2.0) == pytest.approx(-1 / (8 * math.pi))
    assert half_plane_defect_integral(1, 1) == pytest.approx(-1 / (8 * math.sqrt(math.pi)), rel=1e-10)
    assert half_plane_defect_integral(3, 0.5) == pytest.approx(-3 / (8 * math.sqrt(0.5 * math.pi)), rel=1e-10)
    assert half_plane_defect(1.0, 1e-3) == 0.0
    with pytest.raises(ValueError):
        half_plane_defect(-1, 1)
