"""Closed-form caching and handover results for a dual-mode SBS.

A :class:`CachingScenario` places an MUE on the trailing edge of one beam at
distance ``initial_distance`` from the SBS. ``theta_hat`` is the heading
measured from the outward radial through that point; the leading edge is
reached for ``beam_width < theta_hat < pi``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import geometry
from .errors import DiagnosticWarning, DomainError, NumericError
from .geometry import BeamLayout, Point2D
from .radio import LinkBudget, PathLossParams, dbm_to_watts

log = logging.getLogger(__name__)

# survival level where the caching-duration tail is cut
TAIL_TRUNCATION = 1e-9
QUAD_EPSABS = 1e-12


@dataclass(frozen=True)
class CachingScenario:
    initial_distance: float
    speed: float
    direction: float
    beam: BeamLayout
    link: LinkBudget
    channel: PathLossParams
    beam_index: int = 0
    theta_hat: float = field(init=False)

    def __post_init__(self):
        if not self.initial_distance > 0:
            raise DomainError("initial_distance must be positive")
        if not self.speed > 0:
            raise DomainError("speed must be positive")
        lead = self.beam.leading_edge(self.beam_index)
        object.__setattr__(self, "direction", geometry.wrap_angle(self.direction))
        object.__setattr__(
            self, "theta_hat", geometry.wrap_angle(self.direction - lead + self.beam.beam_width)
        )

    @classmethod
    def from_relative_heading(cls, initial_distance, speed, theta_hat, beam, link, channel,
                              beam_index=0) -> "CachingScenario":
        direction = beam.trailing_edge(beam_index) + theta_hat
        return cls(initial_distance, speed, direction, beam, link, channel, beam_index)

    @property
    def beam_width(self) -> float:
        return self.beam.beam_width

    @property
    def position(self) -> Point2D:
        return Point2D.polar(self.initial_distance, self.beam.trailing_edge(self.beam_index))

    @property
    def min_distance(self) -> float:
        """Shortest possible path to the leading edge (r_min)."""
        return geometry.min_crossing_distance(self.position, self.beam, self.beam_index)

    @property
    def crosses(self) -> bool:
        return self.beam_width < self.theta_hat < math.pi

    @property
    def crossing_distance(self) -> float:
        """Path length inside the beam for this scenario's own heading."""
        return geometry.crossing_length(self.position, self.direction, self.beam, self.beam_index)

    @property
    def caching_duration(self) -> float:
        return self.crossing_distance / self.speed


@dataclass(frozen=True)
class TrafficModel:
    segment_size: float = 1e6
    play_rate: float = 1000.0
    cache_capacity: float = 2e10

    def __post_init__(self):
        if min(self.segment_size, self.play_rate, self.cache_capacity) <= 0:
            raise DomainError("traffic parameters must be positive")
        ratio = self.cache_capacity / self.segment_size
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise DomainError("cache_capacity must be a whole number of segments")

    @property
    def capacity_segments(self) -> int:
        return int(round(self.cache_capacity / self.segment_size))

    @property
    def playback_bitrate(self) -> float:
        return self.segment_size * self.play_rate


@dataclass(frozen=True)
class HofModel:
    cell_radius: float = 30.0
    mts: float = 1.0
    mean_intercell_distance: float = 60.0

    def __post_init__(self):
        if min(self.cell_radius, self.mts, self.mean_intercell_distance) <= 0:
            raise DomainError("HOF model parameters must be positive")


# -- caching duration ------------------------------------------------------

def _cdf_terms(t0, scenario: CachingScenario):
    t0 = np.asarray(t0, dtype=float)
    if np.any(t0 < 0):
        raise DomainError("t0 must be non-negative")
    r_min = scenario.min_distance
    reach = scenario.speed * t0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(reach > 0, r_min / reach, np.inf)
    active = ratio <= 1.0
    a1 = np.arccos(np.where(active, ratio, 1.0))
    apex = math.acos(min(1.0, r_min / scenario.initial_distance))
    raw = np.where(active, (a1 + np.minimum(apex, a1)) / (math.pi - scenario.beam_width), 0.0)
    return raw


def caching_duration_cdf_raw(t0, scenario: CachingScenario):
    """Unclamped caching-duration CDF (may exceed 1 for beams wider than pi/2)."""
    raw = _cdf_terms(t0, scenario)
    return float(raw) if raw.ndim == 0 else raw


def caching_duration_cdf(t0, scenario: CachingScenario):
    """P(t_c <= t0) for a heading uniform over the crossing-admissible range."""
    raw = _cdf_terms(t0, scenario)
    clamped = np.clip(raw, 0.0, 1.0)
    if np.any(raw > 1.0):
        log.info("caching-duration CDF clamped; max raw value %.12g", float(np.max(raw)))
    return float(clamped) if clamped.ndim == 0 else clamped


def caching_duration_quantile(p, scenario: CachingScenario):
    """Inverse of :func:`caching_duration_cdf` for ``0 <= p < 1``."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p >= 1)):
        raise DomainError("quantile level must lie in [0, 1)")
    width = math.pi - scenario.beam_width
    apex = math.acos(min(1.0, scenario.min_distance / scenario.initial_distance))
    target = p * width
    # below 2*apex both arccos terms grow together, above it only the first one does
    angle = np.where(target <= 2 * apex, target / 2, target - apex)
    if np.any(angle >= math.pi / 2):
        raise DomainError("quantile level beyond the support of the caching duration")
    out = scenario.min_distance / (scenario.speed * np.cos(angle))
    return float(out) if out.ndim == 0 else out


def expected_caching_duration(scenario: CachingScenario, truncation=TAIL_TRUNCATION) -> float:
    """Integral of the survival function, cut where it drops below ``truncation``.

    The untruncated mean diverges logarithmically because grazing headings
    travel arbitrarily far inside the (unbounded) beam.
    """
    t_lo = scenario.min_distance / scenario.speed
    t_hi = caching_duration_quantile(1.0 - truncation, scenario)
    apex = math.acos(min(1.0, scenario.min_distance / scenario.initial_distance))
    t_kink = scenario.min_distance / (scenario.speed * math.cos(apex)) if apex < math.pi / 2 else t_hi

    def survival_log(u):
        t = math.exp(u)
        return (1.0 - caching_duration_cdf(t, scenario)) * t

    lo, hi = math.log(t_lo), math.log(t_hi)
    points = [math.log(t_kink)] if t_lo < t_kink < t_hi else None
    value, err, info = _quad(survival_log, lo, hi, points=points)
    return t_lo + value


# -- caching rate ----------------------------------------------------------

def _path_constants(scenario: CachingScenario):
    if not scenario.crosses:
        raise DomainError(
            f"theta_hat={scenario.theta_hat:.6g} outside ({scenario.beam_width:.6g}, pi); "
            "the heading never crosses the beam"
        )
    r = scenario.initial_distance
    th, tk = scenario.theta_hat, scenario.beam_width
    # perpendicular distance from the SBS to the path
    h = r * math.sin(th)
    lo, hi = th - tk, th
    closest = h if lo <= math.pi / 2 <= hi else min(h / math.sin(lo), h / math.sin(hi))
    if closest < scenario.channel.reference_distance:
        raise DomainError("path passes closer to the SBS than the reference distance")
    link, ch = scenario.link, scenario.channel
    snr_at_h = (link.beta * dbm_to_watts(link.tx_power) * link.combined_gain
                * h ** (-ch.exponent) / link.noise_power_w)
    path_len = r * math.sin(tk) / math.sin(lo)
    return h, snr_at_h, lo, hi, path_len


def _closed_form_antiderivative(psi, delta1):
    """Antiderivative of ln(1 + d*sin^2 psi)/sin^2 psi on (0, pi)."""
    k = math.sqrt(1.0 + delta1)
    s, c = math.sin(psi), math.cos(psi)
    return -(c / s) * math.log1p(delta1 * s * s) - 2.0 * psi + 2.0 * k * math.atan2(k * s, c)


def _quad(func, a, b, **kwargs):
    value, err, info, *rest = integrate.quad(func, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12,
                                             limit=500, full_output=1, **kwargs)
    if rest and rest[0] and err > max(1e-8 * abs(value), QUAD_EPSABS * 1e3):
        raise NumericError(f"quadrature did not converge: {rest[0]} (value={value}, err={err})")
    return value, err, info


def caching_rate(scenario: CachingScenario, method: str = "auto") -> float:
    """Path-averaged achievable rate (bit/s) while crossing the beam, R^c.

    ``method`` is ``"closed"`` (path-loss exponent 2 only), ``"quadrature"``
    or ``"auto"``.
    """
    h, delta1, lo, hi, path_len = _path_constants(scenario)
    alpha = scenario.channel.exponent
    if method == "auto":
        method = "closed" if alpha == 2.0 else "quadrature"
    if method == "closed":
        if alpha != 2.0:
            raise DomainError("closed form requires path-loss exponent 2")
        nats = (_closed_form_antiderivative(hi, delta1)
                - _closed_form_antiderivative(lo, delta1))
    elif method == "quadrature":
        th = scenario.theta_hat

        def integrand(theta):
            f = math.sin(th - theta)
            return math.log1p(delta1 * f**alpha) / (f * f)

        nats, _, _ = _quad(integrand, 0.0, scenario.beam_width)
    else:
        raise ValueError(f"unknown method {method!r}")
    return scenario.link.bandwidth * h / path_len * nats / math.log(2.0)


def average_caching_rate(scenario: CachingScenario, coverage=None, method="auto") -> float:
    """Coverage-weighted caching rate: P_c times :func:`caching_rate`."""
    if coverage is None:
        coverage = geometry.coverage_probability(scenario.beam)
    if coverage == 0.0:
        return 0.0
    return coverage * caching_rate(scenario, method)


# -- traffic and handover ---------------------------------------------------

def cached_segments(rate, duration, traffic: TrafficModel):
    """Segments stored during ``duration`` at ``rate``, capped by the cache size."""
    rate = np.asarray(rate, dtype=float)
    duration = np.asarray(duration, dtype=float)
    if np.any(rate < 0) or np.any(duration < 0):
        raise DomainError("rate and duration must be non-negative")
    # relative nudge so e.g. 3 * 0.1 / 0.1 does not floor to 2
    fetched = np.floor(rate * duration / traffic.segment_size * (1 + 1e-12))
    out = np.minimum(fetched, traffic.capacity_segments).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def cache_distance(segments, speed, traffic: TrafficModel):
    """Distance covered while playing ``segments`` cached segments."""
    out = np.asarray(segments, dtype=float) / traffic.play_rate * speed
    return float(out) if out.ndim == 0 else out


def expected_cache_distance_from_quantiles(quantile, rate, speed, traffic: TrafficModel,
                                           n=100_000) -> float:
    """Mean cache distance over durations drawn at ``n`` midpoint quantile levels."""
    levels = (np.arange(n) + 0.5) / n
    durations = np.asarray(quantile(levels), dtype=float)
    durations = np.broadcast_to(durations, levels.shape)
    return float(np.mean(cache_distance(cached_segments(rate, durations, traffic), speed, traffic)))


def expected_cache_distance(scenario: CachingScenario, traffic: TrafficModel, rate=None,
                            n=100_000) -> float:
    """Expected distance travelled on cached content after one beam crossing.

    The floor/min of the segment count is applied per duration sample, not to
    the mean duration.
    """
    if rate is None:
        rate = average_caching_rate(scenario)
    return expected_cache_distance_from_quantiles(
        lambda p: caching_duration_quantile(p, scenario), rate, scenario.speed, traffic, n
    )


def ho_skip_factor(expected_distance: float, model: HofModel) -> int:
    """Whole number of cells passed on cached content without cell search."""
    if expected_distance < 0:
        raise DomainError("expected distance must be non-negative")
    return int(math.floor(expected_distance / model.mean_intercell_distance))


def hof_probability(speed: float, model: HofModel) -> float:
    """Probability that a random chord is shorter than speed * t_MTS."""
    if speed < 0:
        raise DomainError("speed must be non-negative")
    x = speed * model.mts / (2.0 * model.cell_radius)
    if x > 1.0:
        warnings.warn(f"v*t_MTS exceeds the cell diameter (ratio {x:.4g}); HOF saturates at 1",
                      DiagnosticWarning, stacklevel=2)
        return 1.0
    return (2.0 / math.pi) * math.asin(x)
