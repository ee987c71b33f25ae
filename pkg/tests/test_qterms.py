import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import ndtr

from crisnoma.montecarlo import simulate_conditional_ber
from crisnoma.qterms import (
    QTermTable,
    UnsupportedModulation,
    derive_qterm_table,
    gray_bits,
    pam_levels,
    sic_decode,
    slice_pam,
)


def test_single_user_tables():
    assert derive_qterm_table(1, [4]).terms(0) == [(1.0, (1,))]
    t16 = sorted(derive_qterm_table(1, [16]).terms(0), key=lambda t: t[1])
    assert t16 == [(0.75, (1,)), (0.5, (3,)), (-0.25, (5,))]


@pytest.mark.parametrize("M", [2, 8, 9, 32, 0])
def test_unsupported_modulation(M):
    with pytest.raises(UnsupportedModulation):
        derive_qterm_table(1, [M])


def test_bad_arguments():
    with pytest.raises(ValueError):
        derive_qterm_table(2, [4])
    with pytest.raises(ValueError):
        derive_qterm_table(2, [4, 4], sic_order=[0, 0])
    with pytest.raises(ValueError):
        derive_qterm_table(2, [4, 4], reference_h=[1.0, -1.0])


@pytest.mark.parametrize("m", [2, 4, 8, 16, 32, 64])
def test_gray_labels_adjacent_differ_by_one_bit(m):
    g = gray_bits(m)
    assert len({tuple(r) for r in g}) == m
    assert np.all(np.sum(g[1:] != g[:-1], axis=1) == 1)


def test_slicer_ties_go_low():
    # boundary between levels -1 and +1 of 4-PAM sits at 0
    assert slice_pam(0.0, 1.0, 4) == 1
    assert slice_pam(1e-12, 1.0, 4) == 2
    assert slice_pam(2.0, 1.0, 4) == 2


@given(st.integers(0, 15), st.integers(0, 3))
def test_noiseless_sic_recovers_nested_symbols(i, j):
    h = np.array([10.0, 1.0])
    levels = [pam_levels(4)[i % 4], pam_levels(2)[j % 2]]
    y = np.array(h[0] * levels[0] + h[1] * levels[1])
    dec = sic_decode(y, h, (16, 4), (0, 1))
    assert dec.tolist() == [i % 4, j % 2]


def test_text_round_trip_and_no_duplicate_rows():
    t = derive_qterm_table(2, [16, 4], [0, 1])
    back = QTermTable.from_text(t.to_text())
    assert back.mod_orders == t.mod_orders and back.sic_order == t.sic_order
    for k in range(2):
        assert np.array_equal(back.coeffs[k], t.coeffs[k])
        assert np.array_equal(back.weights[k], t.weights[k])
        assert len({tuple(r) for r in t.coeffs[k].tolist()}) == len(t.coeffs[k])
    with pytest.raises(ValueError):
        QTermTable.from_text("0 1.0 1\n")


def test_conditional_ber_single_user_closed_form():
    t = derive_qterm_table(1, [16])
    h, s = 2.0, 1.3
    x = h / s
    expect = 0.75 * ndtr(-x) + 0.5 * ndtr(-3 * x) - 0.25 * ndtr(-5 * x)
    assert t.conditional_ber(0, [h], s) == pytest.approx(expect, rel=1e-14)


@given(h1=st.floats(0.1, 10), h2=st.floats(0.1, 10), s=st.floats(0.05, 20))
def test_conditional_ber_in_unit_interval(h1, h2, s):
    h = np.array([max(h1, h2), min(h1, h2)])
    t = derive_qterm_table(2, [16, 4], [0, 1], reference_h=h)
    for k in range(2):
        assert -1e-12 <= t.conditional_ber(k, h, s) <= 1 + 1e-12


def test_large_noise_gives_half():
    t = derive_qterm_table(2, [4, 4], [0, 1], reference_h=[2.0, 1.0])
    for k in range(2):
        assert t.conditional_ber(k, [2.0, 1.0], 1e9) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("h", [(3.0, 1.0), (1.0, 0.8), (5.0, 0.3)])
def test_conditional_ber_matches_detector(h):
    mods, order, sigma = (4, 4), (0, 1), 0.6
    t = derive_qterm_table(2, mods, order, reference_h=h)
    ber, errors, bits = simulate_conditional_ber(h, mods, order, sigma, 200_000, seed=11)
    for k in range(2):
        p = t.conditional_ber(k, h, sigma)
        sd = math.sqrt(max(p * (1 - p), 1e-12) / bits[k])
        assert abs(ber[k] - p) <= 4 * sd
