import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import hyp2f1

from crisnoma.special import (
    CorrelationKind,
    CorrelationModel,
    correlation,
    gauss_2f1,
    gauss_2f1_closed_form_at_one,
    kernel_gi,
    kernel_gk,
    kernel_gk_minus_one,
)

TRIPLES = [(-0.5, -0.5, 1.0), (0.5, 0.5, 2.0)]


def test_series_at_zero_is_one():
    for a, b, c in TRIPLES:
        assert gauss_2f1(a, b, c, 0.0, 6) == 1.0
        assert gauss_2f1(a, b, c, 0.0, None) == 1.0


def test_quarter_argument_six_terms():
    # n = 0..5 partial sum, cross-checked with exact rational arithmetic below
    from fractions import Fraction

    total, term = Fraction(0), Fraction(1)
    a = b = Fraction(-1, 2)
    z = Fraction(1, 4)
    for n in range(6):
        total += term
        term *= (a + n) * (b + n) / ((1 + n) * (n + 1)) * z
    assert gauss_2f1(-0.5, -0.5, 1.0, 0.25, 6) == pytest.approx(float(total), abs=1e-15)
    assert gauss_2f1(-0.5, -0.5, 1.0, 0.25, 6) == pytest.approx(1.063544288, abs=1e-9)


def test_converged_matches_scipy():
    z = np.linspace(0, 0.99, 67)
    for a, b, c in TRIPLES:
        assert np.max(np.abs(gauss_2f1(a, b, c, z, None) - hyp2f1(a, b, c, z))) < 2e-6


@pytest.mark.parametrize("a,b,c", TRIPLES)
def test_endpoint_matches_gauss_summation(a, b, c):
    assert gauss_2f1_closed_form_at_one(a, b, c) == pytest.approx(4 / math.pi, rel=1e-14)
    assert gauss_2f1(a, b, c, 1.0, None) == pytest.approx(4 / math.pi, abs=1e-6)


def test_closed_form_rejects_divergent():
    with pytest.raises(ValueError):
        gauss_2f1_closed_form_at_one(1.0, 1.0, 1.5)


def test_argument_validation():
    with pytest.raises(ValueError):
        gauss_2f1(0.5, 0.5, 0.0, 0.2)
    with pytest.raises(ValueError):
        gauss_2f1(0.5, 0.5, 2.0, 1.2)
    with pytest.raises(ValueError):
        gauss_2f1(0.5, 0.5, 2.0, -0.1)
    with pytest.raises(ValueError):
        gauss_2f1(0.5, 0.5, 2.0, 0.5, terms=0)


def test_kernel_gi_values():
    assert kernel_gi(0.0) == 0.0
    assert kernel_gi(1.0, None) == pytest.approx(16 / math.pi ** 2, abs=1e-6)
    oracle = 0.25 * hyp2f1(-0.5, -0.5, 1, 0.25) * hyp2f1(0.5, 0.5, 2, 0.25)
    assert kernel_gi(0.5, None) == pytest.approx(oracle, rel=1e-9)
    # six-term value pinned as a regression constant
    assert kernel_gi(0.5) == pytest.approx(0.2750935544, rel=1e-9)


def test_kernel_gk_expected_envelope_product():
    # (pi/4) sqrt(g_k) = E|h||h'| for unit Rayleigh pairs
    assert math.pi / 4 * math.sqrt(kernel_gk(0.0)) == pytest.approx(math.pi / 4)
    assert math.pi / 4 * math.sqrt(kernel_gk(1.0, None)) == pytest.approx(1.0, abs=1e-6)
    rng = np.random.default_rng(1)
    rho = 0.8
    n = 400_000
    x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    e = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    y = rho * x + math.sqrt(1 - rho ** 2) * e
    mc = np.mean(np.abs(x) * np.abs(y))
    assert math.pi / 4 * math.sqrt(kernel_gk(rho ** 2, None)) == pytest.approx(mc, rel=5e-3)


def test_kernel_gk_minus_one_is_cancellation_free():
    z = np.array([1e-12, 1e-6, 0.3])
    assert np.allclose(kernel_gk_minus_one(z, None), kernel_gk(z, None) - 1, rtol=1e-6, atol=1e-15)
    assert kernel_gk_minus_one(1e-12, None) > 0


@given(z=st.floats(0, 1), L=st.integers(1, 30))
def test_monotone_in_terms(z, L):
    for a, b, c in TRIPLES:
        assert gauss_2f1(a, b, c, z, L + 1) >= gauss_2f1(a, b, c, z, L) - 1e-15


@given(z=st.floats(0, 0.45))
def test_six_terms_close_to_hundred_on_small_arguments(z):
    for a, b, c in TRIPLES:
        assert abs(gauss_2f1(a, b, c, z, 6) - gauss_2f1(a, b, c, z, 100)) < 1e-4


def test_six_term_error_profile():
    # measured worst cases on [0, 0.9]; see the acceptance module for the 1e-4 claim
    z = np.linspace(0, 0.9, 901)
    d1 = np.abs(gauss_2f1(-0.5, -0.5, 1.0, z, 6) - gauss_2f1(-0.5, -0.5, 1.0, z, 100)).max()
    d2 = np.abs(gauss_2f1(0.5, 0.5, 2.0, z, 6) - gauss_2f1(0.5, 0.5, 2.0, z, 100)).max()
    assert 5e-4 < d1 < 6e-4
    assert 1.4e-2 < d2 < 1.5e-2


@pytest.mark.xfail(strict=True, reason="six terms miss 1e-4 for z above about 0.46 (second triple)")
def test_six_terms_within_1e4_up_to_09():
    z = np.linspace(0, 0.9, 91)
    for a, b, c in TRIPLES:
        assert np.max(np.abs(gauss_2f1(a, b, c, z, 6) - gauss_2f1(a, b, c, z, 100))) < 1e-4


def test_sinc_zero_at_half_wavelength():
    m = CorrelationModel(CorrelationKind.SINC, 0.01)
    assert correlation(m, 0.0) == 1.0
    assert abs(correlation(m, 0.005)) < 1e-15
    assert correlation(m, 0.0025) == pytest.approx(2 / math.pi)


@given(r=st.floats(0, 20.0))
def test_correlation_bounded(r):
    m = CorrelationModel("sinc", 1.0)
    assert abs(correlation(m, r)) <= 1.0


def test_correlation_none_and_validation():
    m = CorrelationModel("none", 1.0)
    assert list(correlation(m, np.array([0.0, 1e-9, 2.0]))) == [1.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        correlation(m, -1.0)
    with pytest.raises(ValueError):
        CorrelationModel("sinc", 0.0)
    with pytest.raises(ValueError):
        kernel_gi(1.5)
