"""Link budget: large-scale path loss, sectorized gains, SNR and Shannon rate.

All functions are pure. Randomness (shadowing, interferer gains) enters only
through explicit samples or a caller-owned generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0


class Band(str, Enum):
    MMW_LOS = "mmW-LoS"
    MMW_NLOS = "mmW-NLoS"
    MICROWAVE = "microwave"


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def db_to_linear(db):
    return _scalar(np.power(10.0, np.asarray(db, dtype=float) / 10.0))


def linear_to_db(x):
    return _scalar(10.0 * np.log10(np.asarray(x, dtype=float)))


def dbm_to_watts(dbm):
    return db_to_linear(dbm) * 1e-3


@dataclass(frozen=True)
class PathLossParams:
    carrier_frequency: float
    reference_distance: float = 1.0
    exponent: float = 2.0
    shadowing_std: float = 0.0
    band: Band = Band.MMW_LOS

    def __post_init__(self):
        if not self.carrier_frequency > 0:
            raise DomainError("carrier_frequency must be positive")
        if not self.reference_distance > 0:
            raise DomainError("reference_distance must be positive")
        if not self.exponent > 0:
            raise DomainError("path loss exponent must be positive")
        if not self.shadowing_std >= 0:
            raise DomainError("shadowing_std must be non-negative")
        object.__setattr__(self, "band", Band(self.band))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def intercept_db(self) -> float:
        """Free-space loss at the reference distance."""
        return 20.0 * math.log10(4.0 * math.pi * self.reference_distance / self.wavelength)


@dataclass(frozen=True)
class AntennaPattern:
    main_lobe_gain: float = 18.0
    side_lobe_gain: float = -2.0
    main_lobe_width: float = math.radians(10.0)

    def __post_init__(self):
        if self.main_lobe_gain < self.side_lobe_gain:
            raise DomainError("main_lobe_gain must be at least side_lobe_gain")
        if not 0.0 < self.main_lobe_width < 2.0 * math.pi:
            raise DomainError("main_lobe_width must lie in (0, 2*pi)")

    @property
    def main_lobe_probability(self) -> float:
        """Chance that a uniformly random azimuth falls in the main lobe."""
        return min(1.0, self.main_lobe_width / math.pi)


@dataclass(frozen=True)
class LinkBudget:
    """Per-link constants. ``combined_gain`` and ``beta`` are linear."""

    tx_power: float  # dBm
    bandwidth: float  # Hz
    noise_psd: float = -174.0  # dBm/Hz
    combined_gain: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if not self.combined_gain > 0:
            raise DomainError("combined_gain must be positive")

    @classmethod
    def for_channel(cls, params: PathLossParams, tx_power: float, bandwidth: float,
                    noise_psd: float = -174.0, gain_db: float = 0.0) -> "LinkBudget":
        """Build a budget whose ``beta`` matches ``params``; ``gain_db`` is tx+rx gain."""
        r0 = params.reference_distance
        beta = (params.wavelength / (4.0 * math.pi * r0)) ** 2 * r0**params.exponent
        return cls(tx_power, bandwidth, noise_psd, float(db_to_linear(gain_db)), beta)

    @property
    def noise_power_w(self) -> float:
        return float(dbm_to_watts(self.noise_psd)) * self.bandwidth


def _check_distance(distance, params: PathLossParams):
    d = np.asarray(distance, dtype=float)
    if np.any(d < params.reference_distance):
        raise DomainError(
            f"path loss model holds for distance >= {params.reference_distance} m"
        )
    return d


def path_loss(distance, params: PathLossParams, shadowing_sample=0.0):
    """Large-scale loss in dB; ``shadowing_sample`` is the caller's draw of chi."""
    d = _check_distance(distance, params)
    loss = (params.intercept_db
            + 10.0 * params.exponent * np.log10(d / params.reference_distance)
            + shadowing_sample)
    return _scalar(loss)


def antenna_gain(offset_angle, pattern: AntennaPattern):
    """Sectorized gain in dB; the main lobe holds for ``|offset| < main_lobe_width``."""
    # fold onto [0, pi] without shifting, so an offset of exactly the lobe width stays exact
    wrapped = np.mod(np.abs(np.asarray(offset_angle, dtype=float)), 2 * math.pi)
    wrapped = np.minimum(wrapped, 2 * math.pi - wrapped)
    return _scalar(np.where(wrapped < pattern.main_lobe_width,
                            pattern.main_lobe_gain, pattern.side_lobe_gain))


def snr(distance, link: LinkBudget, params: PathLossParams, interference_w=0.0):
    """Linear signal-to-noise(-plus-interference) ratio, no shadowing."""
    d = _check_distance(distance, params)
    signal = link.beta * dbm_to_watts(link.tx_power) * link.combined_gain * d ** (-params.exponent)
    return _scalar(signal / (link.noise_power_w + interference_w))


def shannon_rate(snr_linear, bandwidth: float):
    return _scalar(bandwidth * np.log2(1.0 + np.asarray(snr_linear, dtype=float)))


def instantaneous_rate(distance, link: LinkBudget, params: PathLossParams, interference_w=0.0):
    """Achievable rate in bit/s at ``distance``."""
    return shannon_rate(snr(distance, link, params, interference_w), link.bandwidth)


def rss_dbm(distance, link: LinkBudget, params: PathLossParams, shadowing_sample=0.0,
            tx_gain=0.0, rx_gain=0.0):
    return _scalar(link.tx_power + tx_gain + rx_gain
                   - np.asarray(path_loss(distance, params, shadowing_sample)))


def radius_at_rss(threshold_dbm: float, link: LinkBudget, params: PathLossParams,
                  tx_gain=0.0, rx_gain=0.0) -> float:
    """Distance at which the mean RSS falls to ``threshold_dbm``."""
    margin = link.tx_power + tx_gain + rx_gain - threshold_dbm - params.intercept_db
    return params.reference_distance * 10.0 ** (margin / (10.0 * params.exponent))


def interference_gain_probabilities(pattern: AntennaPattern) -> dict[str, float]:
    """Probabilities of the three tx/rx lobe combinations of a random interferer."""
    p = pattern.main_lobe_probability
    return {"max-max": p * p, "max-min": 2.0 * p * (1.0 - p), "min-min": (1.0 - p) ** 2}


def sample_interference_gain(rng: np.random.Generator, pattern: AntennaPattern, size=None):
    """Draw linear combined gains of interfering links with random lobe alignment."""
    probs = interference_gain_probabilities(pattern)
    gmax, gmin = pattern.main_lobe_gain, pattern.side_lobe_gain
    levels = db_to_linear(np.array([2 * gmax, gmax + gmin, 2 * gmin]))
    idx = rng.choice(3, size=size, p=[probs["max-max"], probs["max-min"], probs["min-min"]])
    return levels[idx]
