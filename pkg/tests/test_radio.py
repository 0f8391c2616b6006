import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mmho.errors import DomainError
from mmho.radio import (AntennaPattern, Band, LinkBudget, PathLossParams, antenna_gain,
                        db_to_linear, instantaneous_rate, interference_gain_probabilities,
                        linear_to_db, path_loss, radius_at_rss, rss_dbm, sample_interference_gain,
                        shannon_rate, snr)

LOS = PathLossParams(73e9, 1.0, 2.0, 0.0, Band.MMW_LOS)
NLOS = PathLossParams(73e9, 1.0, 3.5, 0.0, Band.MMW_NLOS)
TABLE_LINK = LinkBudget.for_channel(LOS, 30.0, 5e9, -174.0, 36.0)


def test_params_validation():
    with pytest.raises(DomainError):
        PathLossParams(73e9, exponent=0.0)
    with pytest.raises(DomainError):
        PathLossParams(73e9, reference_distance=-1.0)
    with pytest.raises(DomainError):
        PathLossParams(73e9, shadowing_std=-0.5)
    with pytest.raises(DomainError):
        AntennaPattern(-2.0, 18.0)
    with pytest.raises(DomainError):
        LinkBudget(30.0, 0.0)
    assert PathLossParams(2e9, band="microwave").band is Band.MICROWAVE


def test_path_loss_at_reference_distance():
    params = PathLossParams(28e9, 2.0, 3.0)
    lam = 299_792_458.0 / 28e9
    assert path_loss(2.0, params) == pytest.approx(20 * math.log10(4 * math.pi * 2.0 / lam))


def test_path_loss_73ghz_one_metre():
    lam = 299_792_458.0 / 73e9
    assert lam == pytest.approx(4.1067e-3, rel=1e-4)
    expected = 20 * math.log10(4 * math.pi / lam)
    assert path_loss(1.0, LOS) == pytest.approx(expected, abs=1e-12)
    assert path_loss(1.0, LOS) == pytest.approx(69.7, abs=0.05)


def test_path_loss_doubling_and_shadowing():
    assert path_loss(40.0, LOS) - path_loss(20.0, LOS) == pytest.approx(20 * math.log10(2))
    assert path_loss(20.0, LOS, 4.5) - path_loss(20.0, LOS) == pytest.approx(4.5)
    with pytest.raises(DomainError):
        path_loss(0.5, LOS)


def test_antenna_gain_lobes():
    pattern = AntennaPattern(18.0, -2.0, math.radians(10))
    assert antenna_gain(0.0, pattern) == 18.0
    assert antenna_gain(math.pi, pattern) == -2.0
    assert antenna_gain(math.radians(10), pattern) == -2.0
    assert antenna_gain(-math.radians(9.9), pattern) == 18.0
    assert_allclose(antenna_gain(np.array([0.0, 2 * math.pi - 0.01]), pattern), [18.0, 18.0])


def test_snr_at_reference_distance():
    link = LinkBudget(20.0, 1e9, -170.0, 100.0, 2e-6)
    params = PathLossParams(10e9, 1.0, 2.5)
    expected = 2e-6 * 0.1 * 100.0 / (10 ** (-20.0) * 1e9)
    assert snr(1.0, link, params) == pytest.approx(expected, rel=1e-12)


def test_snr_matches_rss_chain():
    # SNR from received power in dBm minus noise in dBm must equal the linear formula
    rx = rss_dbm(20.0, TABLE_LINK, LOS, tx_gain=18.0, rx_gain=18.0)
    noise_dbm = -174.0 + 10 * math.log10(5e9)
    assert linear_to_db(snr(20.0, TABLE_LINK, LOS)) == pytest.approx(rx - noise_dbm, abs=1e-9)
    assert snr(40.0, TABLE_LINK, LOS) == pytest.approx(snr(20.0, TABLE_LINK, LOS) / 4, rel=1e-12)


def test_table_link_budget_by_hand():
    lam = 299_792_458.0 / 73e9
    fspl = 20 * math.log10(4 * math.pi / lam) + 20 * math.log10(20.0)
    rx_dbm = 30.0 + 36.0 - fspl
    noise_dbm = -174.0 + 10 * math.log10(5e9)
    snr_lin = 10 ** ((rx_dbm - noise_dbm) / 10)
    assert snr(20.0, TABLE_LINK, LOS) == pytest.approx(snr_lin, rel=1e-10)
    assert instantaneous_rate(20.0, TABLE_LINK, LOS) == pytest.approx(5e9 * math.log2(1 + snr_lin))
    assert instantaneous_rate(20.0, TABLE_LINK, LOS) > 10e9


def test_shannon_rate_trivial_points():
    assert shannon_rate(0.0, 5e9) == 0.0
    assert shannon_rate(1.0, 5e9) == pytest.approx(5e9)


def test_rss_without_gain_or_loss():
    # a 1 Hz carrier at r0 chosen so the free-space intercept is 0 dB
    params = PathLossParams(299_792_458.0 / (4 * math.pi), 1.0, 2.0)
    assert path_loss(1.0, params) == pytest.approx(0.0, abs=1e-12)
    assert rss_dbm(1.0, LinkBudget(23.0, 1e6), params) == pytest.approx(23.0)


def test_threshold_radius():
    uw = PathLossParams(2e9, 1.0, 3.5, 4.0, Band.MICROWAVE)
    link = LinkBudget.for_channel(uw, 10.0, 20e6)
    a = radius_at_rss(-80.0, link, uw)
    assert rss_dbm(a, link, uw) == pytest.approx(-80.0, abs=1e-9)
    assert rss_dbm(a * 0.99, link, uw) > -80.0 > rss_dbm(a * 1.01, link, uw)


def test_seeded_rss_sample_by_hand():
    rng = np.random.default_rng(123)
    chi = rng.normal(0.0, 4.0)
    uw = PathLossParams(2e9, 1.0, 3.5, 4.0, Band.MICROWAVE)
    link = LinkBudget.for_channel(uw, 10.0, 20e6)
    lam = 299_792_458.0 / 2e9
    by_hand = 10.0 - (20 * math.log10(4 * math.pi / lam) + 35 * math.log10(25.0) + chi)
    assert rss_dbm(25.0, link, uw, chi) == pytest.approx(by_hand, abs=1e-12)


def test_interference_probabilities():
    pattern = AntennaPattern(18.0, -2.0, math.radians(30))
    probs = interference_gain_probabilities(pattern)
    assert sum(probs.values()) == pytest.approx(1.0)
    draws = sample_interference_gain(np.random.default_rng(0), pattern, 200_000)
    hit = np.mean(draws == db_to_linear(36.0))
    assert hit == pytest.approx(probs["max-max"], abs=4 * math.sqrt(probs["max-max"] / 200_000))


@given(st.floats(1.0, 1e4), st.floats(1.0001, 10.0), st.sampled_from([LOS, NLOS]))
def test_path_loss_increasing(d, factor, params):
    assert path_loss(d * factor, params) > path_loss(d, params)


@given(st.floats(1.0, 1e4), st.floats(1.0001, 10.0), st.sampled_from([LOS, NLOS]))
def test_rate_decreasing(d, factor, params):
    link = LinkBudget.for_channel(params, 30.0, 5e9, -174.0, 36.0)
    assert instantaneous_rate(d * factor, link, params) < instantaneous_rate(d, link, params)


@given(st.floats(1.0, 1e3), st.floats(1e-12, 1e-6))
def test_rate_continuous(d, eps):
    near = instantaneous_rate(d * (1 + eps), TABLE_LINK, LOS)
    assert abs(near - instantaneous_rate(d, TABLE_LINK, LOS)) <= 5e9 * 10 * eps + 1e-3


@given(st.floats(-300.0, 300.0))
def test_db_round_trip(db):
    assert abs(linear_to_db(db_to_linear(db)) - db) <= 1e-12 * max(1.0, abs(db))


@given(st.floats(1e-30, 1e30))
def test_linear_round_trip(x):
    assert abs(db_to_linear(linear_to_db(x)) - x) <= 1e-12 * x


@given(st.floats(1.0, 500.0))
def test_zero_shadowing_is_deterministic(d):
    link = LinkBudget.for_channel(NLOS, 30.0, 5e9, -174.0, 36.0)
    first = (path_loss(d, NLOS), snr(d, link, NLOS), rss_dbm(d, link, NLOS))
    assert first == (path_loss(d, NLOS), snr(d, link, NLOS), rss_dbm(d, link, NLOS))
