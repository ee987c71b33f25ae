import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import ndtr

from crisnoma.ber import (
    BerQuadrature,
    NoiseModel,
    analytic_ber,
    ber_integrand,
    ber_user,
    decoding_order,
    expected_q,
    max_ber,
    sum_ber,
    table_for,
)
from crisnoma.channel_stats import EffectiveChannelStats
from crisnoma.qterms import derive_qterm_table

from conftest import make_scenario


def direct_gamma_q(alpha, theta, sigma):
    f = lambda x: stats.gamma.pdf(x, alpha, scale=theta) * ndtr(-x / sigma)
    hi = stats.gamma.ppf(1 - 1e-16, alpha, scale=theta)
    return integrate.quad(f, 0, hi, epsabs=1e-13, epsrel=1e-12, limit=400)[0]


@pytest.mark.parametrize("alpha,theta,sigma", [(40.0, 0.05, 0.5), (4.0, 0.5, 1.0), (200.0, 0.01, 3.0)])
def test_cf_inversion_identity(alpha, theta, sigma):
    s = [EffectiveChannelStats(alpha * theta, alpha * theta ** 2)]
    got = expected_q([[1.0]], s, sigma)[0]
    assert got == pytest.approx(direct_gamma_q(alpha, theta, sigma), abs=1e-8)


def test_gaussian_interference_identity():
    # X = G + N(0, v): direct double expectation
    alpha, theta, v, sigma = 9.0, 0.2, 0.3, 0.7
    s = [EffectiveChannelStats(alpha * theta, alpha * theta ** 2, {1: v}),
         EffectiveChannelStats(1.0, 0.1, {0: 0.1})]
    tot = math.sqrt(sigma ** 2 + v)
    # Gaussian part integrates out: E[Q((G + N)/s)] = E[Q(G / sqrt(s^2 + v))]
    assert expected_q([[1.0, 0.0]], s, sigma)[0] == pytest.approx(direct_gamma_q(alpha, theta, tot), abs=1e-8)


def test_degenerate_channels_reduce_to_q():
    s = [EffectiveChannelStats(3.0, 0.0, {1: 0.0}), EffectiveChannelStats(1.0, 0.0, {0: 0.0})]
    table = derive_qterm_table(2, [16, 4], [0, 1], reference_h=[3.0, 1.0])
    noise = NoiseModel(0.25)
    for k in range(2):
        expect = table.conditional_ber(k, [3.0, 1.0], 0.5)
        assert ber_user(k, table, s, noise) == pytest.approx(expect, abs=1e-9)


def test_noise_dominated_limit():
    s = [EffectiveChannelStats(1.0, 0.1)]
    table = derive_qterm_table(1, [4])
    assert ber_user(0, table, s, NoiseModel(1e12)) == pytest.approx(0.5, abs=1e-6)


def test_integrand_limit_at_zero():
    s = [EffectiveChannelStats(2.0, 0.2, {1: 0.1}), EffectiveChannelStats(1.0, 0.05, {0: 0.2})]
    a = np.array([1.0, -1.0])
    lim = -(2.0 - 1.0) / 0.5
    assert float(ber_integrand(0.0, a, s, 0.5)) == lim
    assert float(ber_integrand(1e-6, a, s, 0.5)) == pytest.approx(lim, rel=1e-6)


def test_zero_row_is_half():
    s = [EffectiveChannelStats(1.0, 0.1)]
    assert expected_q([[0.0]], s, 1.0)[0] == 0.5


def test_ber_non_increasing_in_mean():
    table = derive_qterm_table(1, [16])
    noise = NoiseModel(1.0)
    vals = [ber_user(0, table, [EffectiveChannelStats(m, 0.05 * m * m)], noise)
            for m in np.linspace(0.5, 8, 16)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@given(m1=st.floats(0.5, 20), m2=st.floats(0.5, 20), cv=st.floats(0.01, 0.5), s=st.floats(0.1, 5))
def test_sum_and_max_bounds(m1, m2, cv, s):
    st_ = [EffectiveChannelStats(m1, (cv * m1) ** 2, {1: 0.01}),
           EffectiveChannelStats(m2, (cv * m2) ** 2, {0: 0.01})]
    table = table_for(st_, (4, 4))
    noise = NoiseModel(s * s)
    tot, mx = sum_ber(table, st_, noise), max_ber(table, st_, noise)
    assert 0 <= mx <= tot <= 2 * mx + 1e-15
    assert mx <= 1


def test_identical_users_sum():
    s = [EffectiveChannelStats(2.0, 0.1, {1: 0.05}), EffectiveChannelStats(2.0, 0.1, {0: 0.05})]
    noise = NoiseModel(0.5)
    table = derive_qterm_table(2, [4, 4], [0, 1], reference_h=[2.0, 2.0])
    single = derive_qterm_table(1, [4])
    one = [EffectiveChannelStats(2.0, 0.1)]
    assert sum_ber(single, one, noise) == ber_user(0, single, one, noise)
    # same-gain users: the decoding order breaks symmetry, so compare against K x the mean
    tot = sum_ber(table, s, noise)
    assert tot == pytest.approx(sum(ber_user(k, table, s, noise) for k in range(2)))


def test_decoding_order_by_mean():
    s = [EffectiveChannelStats(1.0, 0.0), EffectiveChannelStats(3.0, 0.0), EffectiveChannelStats(3.0, 0.0)]
    assert decoding_order(s) == (1, 2, 0)


def test_analytic_ber_range(desk):
    for p in (30, 50, 70):
        b = analytic_ber(desk, desk.equal_layout(), (p, p))
        assert np.all((b >= 0) & (b <= 0.5 + 1e-9))


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(0.0)
    assert NoiseModel(4.0).sigma == 2.0


def test_quadrature_settings_agree():
    sc = make_scenario()
    a = analytic_ber(sc, sc.equal_layout(), (60, 60))
    b = analytic_ber(sc, sc.equal_layout(), (60, 60), ber_quad=BerQuadrature(nodes=40, max_panel=0.5, osc=4.0))
    assert np.allclose(a, b, rtol=1e-8, atol=1e-14)
