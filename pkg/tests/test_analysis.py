import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from mmho.analysis import (CachingScenario, HofModel, TrafficModel, average_caching_rate,
                           cache_distance, cached_segments, caching_duration_cdf,
                           caching_duration_cdf_raw, caching_duration_quantile, caching_rate,
                           expected_cache_distance, expected_cache_distance_from_quantiles,
                           expected_caching_duration, ho_skip_factor, hof_probability)
from mmho.errors import DiagnosticWarning, DomainError
from mmho.geometry import BeamLayout, chord_length_pdf
from mmho.radio import Band, LinkBudget, PathLossParams, instantaneous_rate
from mmho.sim.topology import generate_topology, mean_nearest_neighbor_distance
from mmho.sim.validation import empirical_cdf, sample_caching_durations

LOS = PathLossParams(73e9, 1.0, 2.0, 0.0, Band.MMW_LOS)
NLOS = PathLossParams(73e9, 1.0, 3.5, 0.0, Band.MMW_NLOS)
V60 = 60 / 3.6


def _link(channel):
    return LinkBudget.for_channel(channel, 30.0, 5e9, -174.0, 36.0)


def scenario(r=10.0, theta_hat=math.pi / 2, width=math.radians(10), channel=LOS, speed=V60,
             base=0.0, n_beams=3):
    beam = BeamLayout(n_beams, width, base_azimuth=base)
    return CachingScenario.from_relative_heading(r, speed, theta_hat, beam, _link(channel), channel)


def path_rate_oracle(sc):
    """Mean instantaneous rate along the straight in-beam path, integrated over arc length."""
    length = sc.crossing_distance
    x0, y0 = sc.position.x, sc.position.y
    c, s = math.cos(sc.direction), math.sin(sc.direction)

    def rate(t):
        return instantaneous_rate(math.hypot(x0 + t * c, y0 + t * s), sc.link, sc.channel)

    total, _ = integrate.quad(rate, 0.0, length, epsabs=0, epsrel=1e-13, limit=200)
    return total / length


# -- scenario ----------------------------------------------------------------

def test_scenario_theta_hat_and_crossing():
    sc = scenario(theta_hat=1.0, base=2.0)
    assert sc.theta_hat == pytest.approx(1.0)
    assert sc.crosses
    assert not scenario(theta_hat=0.1).crosses
    with pytest.raises(DomainError):
        caching_rate(scenario(theta_hat=math.radians(5)))


# -- caching duration CDF -------------------------------------------------------

def test_cdf_zero_below_minimum_time():
    sc = scenario()
    t_min = sc.min_distance / sc.speed
    assert caching_duration_cdf(t_min, sc) == 0.0
    assert caching_duration_cdf(0.5 * t_min, sc) == 0.0
    assert caching_duration_cdf(0.0, sc) == 0.0
    with pytest.raises(DomainError):
        caching_duration_cdf(-1.0, sc)


def test_cdf_matches_monte_carlo():
    sc = scenario(r=10.0)
    durations = sample_caching_durations(sc, 200_000, np.random.default_rng(3))
    ks = empirical_cdf(durations).ks_distance(lambda t: caching_duration_cdf(t, sc))
    assert ks < 0.01


def test_cdf_closer_start_dominates():
    t = np.linspace(0.0, 3.0, 301)
    f5, f10, f20 = (caching_duration_cdf(t, scenario(r=r)) for r in (5.0, 10.0, 20.0))
    assert np.all(f5 >= f10) and np.all(f10 >= f20)
    assert np.any(f5 > f10)


def test_quantile_inverts_cdf():
    sc = scenario(r=7.0, width=0.4)
    p = np.linspace(0.0, 0.999, 200)
    assert_allclose(caching_duration_cdf(caching_duration_quantile(p, sc), sc), p, atol=1e-12)
    with pytest.raises(DomainError):
        caching_duration_quantile(1.0, sc)


@given(st.floats(0.5, 60.0), st.floats(0.01, math.pi / 2), st.floats(0.5, 40.0),
       st.lists(st.floats(0.0, 50.0), min_size=2, max_size=30))
def test_cdf_monotone_and_bounded(r, width, speed, times):
    sc = scenario(r=r, width=width, speed=speed, n_beams=1)
    t = np.sort(np.array(times))
    f = caching_duration_cdf(t, sc)
    assert np.all((f >= 0.0) & (f <= 1.0))
    assert np.all(np.diff(f) >= -1e-15)
    # right-continuity: values just to the right converge to the value at t
    right = caching_duration_cdf(t + 1e-12, sc)
    assert np.all(np.abs(right - f) < 1e-4)
    # no clamp activation for beams up to a right angle
    raw = caching_duration_cdf_raw(t, sc)
    assert np.all(raw <= 1.0 + 1e-12)


def test_cdf_clamp_for_wide_beam_is_recorded():
    sc = scenario(r=10.0, width=2.5, theta_hat=2.8, n_beams=1)
    raw = caching_duration_cdf_raw(1e4, sc)
    assert raw > 1.0
    assert caching_duration_cdf(1e4, sc) == 1.0


def test_expected_duration_matches_survival_integral():
    sc = scenario(r=12.0, width=0.3)
    t_hi = caching_duration_quantile(1 - 1e-9, sc)
    t_lo = sc.min_distance / sc.speed
    grid = np.geomspace(t_lo, t_hi, 400_001)
    surv = 1 - caching_duration_cdf(grid, sc)
    assert expected_caching_duration(sc) == pytest.approx(t_lo + integrate.trapezoid(surv, grid),
                                                          rel=1e-5)


# -- caching rate ----------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.floats(2.0, 60.0), st.floats(0.02, 1.0), st.floats(0.02, 0.98))
def test_closed_form_matches_quadrature(r, width, u):
    theta_hat = width + u * (math.pi - width)
    sc = scenario(r=r, width=width, theta_hat=theta_hat, n_beams=1)
    assume(r * math.sin(theta_hat) > 1.0)
    closed = caching_rate(sc, "closed")
    quad = caching_rate(sc, "quadrature")
    assert abs(closed - quad) / quad < 1e-8


@pytest.mark.parametrize("channel", [LOS, NLOS])
@pytest.mark.parametrize("theta_deg", [30, 90, 150])
def test_rate_matches_path_integral(channel, theta_deg):
    sc = scenario(r=20.0, theta_hat=math.radians(theta_deg), channel=channel)
    assert caching_rate(sc) == pytest.approx(path_rate_oracle(sc), rel=1e-9)


def test_closed_form_needs_exponent_two():
    with pytest.raises(DomainError):
        caching_rate(scenario(channel=NLOS), "closed")


def test_los_rate_at_twenty_metres():
    for theta_deg in (30, 60, 90, 120, 150):
        assert caching_rate(scenario(r=20.0, theta_hat=math.radians(theta_deg))) > 10e9


def test_average_rate_scales_by_coverage():
    sc = scenario(r=15.0)
    assert average_caching_rate(sc, coverage=0.0) == 0.0
    assert average_caching_rate(sc, coverage=0.4) == pytest.approx(0.4 * caching_rate(sc))


@given(st.floats(2.0, 50.0), st.floats(1.0001, 3.0), st.floats(0.2, 0.95),
       st.sampled_from([LOS, NLOS]))
def test_average_rate_non_increasing_in_distance(r, factor, u, channel):
    width = math.radians(10)
    theta_hat = width + u * (math.pi - width)
    assume(r * math.sin(theta_hat) > 1.0)
    near = average_caching_rate(scenario(r=r, theta_hat=theta_hat, channel=channel))
    far = average_caching_rate(scenario(r=r * factor, theta_hat=theta_hat, channel=channel))
    assert far <= near * (1 + 1e-12)


# -- traffic -----------------------------------------------------------------------

def test_cached_segments_examples():
    tm = TrafficModel(1e6, 1000.0, 4e6)
    assert cached_segments(5e9, 0.0, tm) == 0
    assert cached_segments(10e6, 1.0, tm) == 4
    assert cached_segments(3.7e6, 1.0, TrafficModel(1e6, 1000.0, 100e6)) == 3
    assert cached_segments(0.1, 30.0, TrafficModel(0.1, 1.0, 100.0)) == 30
    with pytest.raises(DomainError):
        TrafficModel(1e6, 1000.0, 2.5e6)


def test_cache_distance_examples():
    tm = TrafficModel()
    assert cache_distance(0, 10.0, tm) == 0.0
    assert cache_distance(1000, 10.0, tm) == pytest.approx(10.0)
    sc = scenario(r=20.0)
    segments = cached_segments(average_caching_rate(sc), sc.caching_duration, tm)
    assert cache_distance(segments, sc.speed, tm) == pytest.approx(segments / 1000 * sc.speed)


def test_expected_distance_deterministic_duration():
    tm = TrafficModel(1e6, 1000.0, 1e12)
    t_star = 2.5
    d = expected_cache_distance_from_quantiles(lambda p: t_star, tm.playback_bitrate, 12.0, tm)
    assert d == pytest.approx(12.0 * t_star)


def test_expected_distance_matches_monte_carlo():
    sc = scenario(r=10.0)
    tm = TrafficModel()
    rate = 2e9
    n = 1_000_000
    durations = sample_caching_durations(sc, n, np.random.default_rng(17))
    d = cache_distance(cached_segments(rate, durations, tm), sc.speed, tm)
    assert expected_cache_distance(sc, tm, rate) == pytest.approx(d.mean(),
                                                                  abs=3 * d.std() / math.sqrt(n))


def test_expected_distance_grows_with_start_distance():
    tm = TrafficModel(1e6, 1000.0, 1e13)
    values = [expected_cache_distance(scenario(r=r), tm, rate=5e9) for r in (5.0, 10.0, 20.0, 40.0)]
    assert np.all(np.diff(values) > 0)


# -- handover ---------------------------------------------------------------------

def test_ho_skip_factor_examples():
    model = HofModel(mean_intercell_distance=40.0)
    assert ho_skip_factor(0.0, model) == 0
    assert ho_skip_factor(2.9 * 40.0, model) == 2
    topo = generate_topology(8, 50, 500.0, 30.0, BeamLayout(3, math.radians(10)),
                             LinkBudget(10.0, 20e6))
    spacing = mean_nearest_neighbor_distance(topo)
    assert 30.0 <= spacing < 100.0
    assert ho_skip_factor(1000.0, HofModel(mean_intercell_distance=spacing)) == int(1000.0 // spacing)


def test_hof_probability_examples():
    model = HofModel(30.0, 1.0)
    assert hof_probability(0.0, model) == 0.0
    assert hof_probability(60.0, model) == pytest.approx(1.0)
    expected = 2 / math.pi * math.asin(V60 / 60.0)
    assert hof_probability(V60, model) == pytest.approx(expected, abs=1e-15)
    assert hof_probability(V60, model) == pytest.approx(0.1792, abs=5e-5)
    with pytest.warns(DiagnosticWarning):
        assert hof_probability(100.0, model) == 1.0


@given(st.floats(0.0, 1.0), st.floats(1.0, 200.0), st.floats(0.1, 5.0))
def test_hof_probability_is_chord_integral(x, a, mts):
    speed = x * 2 * a / mts
    model = HofModel(a, mts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DiagnosticWarning)
        p = hof_probability(speed, model)
    # the substitution d = 2a sin(u) removes the endpoint singularity of the density
    upper = math.asin(min(1.0, speed * mts / (2 * a)))
    area, _ = integrate.quad(lambda u: chord_length_pdf(2 * a * math.sin(u), a) * 2 * a * math.cos(u)
                             if u < math.pi / 2 else 2 / math.pi, 0.0, upper, epsabs=1e-13)
    assert abs(p - area) < 1e-9
