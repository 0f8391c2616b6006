"""Planar geometry of SBS beams, straight trajectories and circular cells.

The SBS sits at the origin. Beam ``i`` of a :class:`BeamLayout` occupies the
azimuth sector ``[lead_i - beam_width, lead_i]`` where
``lead_i = base_azimuth + 2*pi*i/n_beams`` is its leading edge.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DiagnosticWarning, DomainError, NoCrossingError

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# slack for n_beams * beam_width == 2*pi written as e.g. 3 * (2*pi/3)
_ANGLE_SLACK = 1e-12


def wrap_angle(angle):
    """Map an angle (scalar or array) onto ``[0, 2*pi)``."""
    wrapped = np.mod(angle, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"point components must be finite, got ({self.x}, {self.y})")

    @property
    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def azimuth(self) -> float:
        return wrap_angle(math.atan2(self.y, self.x))

    @classmethod
    def polar(cls, radius: float, azimuth: float) -> "Point2D":
        return cls(radius * math.cos(azimuth), radius * math.sin(azimuth))


@dataclass(frozen=True)
class BeamLayout:
    """``n_beams`` equidistant fixed beams of one dual-mode SBS."""

    n_beams: int
    beam_width: float
    base_azimuth: float = 0.0
    cell_radius: float = 30.0

    def __post_init__(self):
        if int(self.n_beams) != self.n_beams or self.n_beams < 1:
            raise DomainError(f"n_beams must be a positive integer, got {self.n_beams}")
        if not 0.0 < self.beam_width < TWO_PI:
            raise DomainError(f"beam_width must lie in (0, 2*pi), got {self.beam_width}")
        if self.n_beams * self.beam_width > TWO_PI + _ANGLE_SLACK:
            raise DomainError(
                f"beams overlap: n_beams * beam_width = {self.n_beams * self.beam_width} > 2*pi"
            )
        if not self.cell_radius > 0.0:
            raise DomainError(f"cell_radius must be positive, got {self.cell_radius}")
        object.__setattr__(self, "n_beams", int(self.n_beams))
        object.__setattr__(self, "base_azimuth", wrap_angle(self.base_azimuth))

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n_beams

    @property
    def angular_coverage(self) -> float:
        """Fraction of the full circle covered by beams."""
        return min(1.0, self.n_beams * self.beam_width / TWO_PI)

    def _check_index(self, beam_index: int):
        if not 0 <= beam_index < self.n_beams:
            raise DomainError(f"beam_index {beam_index} out of range for {self.n_beams} beams")

    def leading_edge(self, beam_index: int = 0) -> float:
        self._check_index(beam_index)
        return wrap_angle(self.base_azimuth + beam_index * self.spacing)

    def trailing_edge(self, beam_index: int = 0) -> float:
        return wrap_angle(self.leading_edge(beam_index) - self.beam_width)

    def contains_azimuth(self, azimuth):
        """True where ``azimuth`` falls inside some beam (vectorised)."""
        # offset behind the leading edge of the nearest beam ahead, in [0, spacing)
        rel = np.mod(self.base_azimuth - np.asarray(azimuth, dtype=float), self.spacing)
        return rel <= self.beam_width


def coverage_probability_raw(n_beams: int, beam_width: float) -> float:
    frac = n_beams * beam_width / TWO_PI
    return frac + (1.0 - frac) * (0.5 * (1.0 - 1.0 / n_beams) + beam_width / (4.0 * math.pi))


def coverage_probability(layout: BeamLayout) -> float:
    """Probability that a trajectory entering the cell crosses a mmW beam.

    The entry point is uniform on the cell boundary and the heading uniform on
    ``[0, 2*pi)``. Needs at least two beams.
    """
    if layout.n_beams < 2:
        raise DomainError(f"coverage probability needs n_beams >= 2, got {layout.n_beams}")
    raw = coverage_probability_raw(layout.n_beams, layout.beam_width)
    if not 0.0 <= raw <= 1.0:
        log.debug("coverage probability clamped from raw value %.17g", raw)
    return min(1.0, max(0.0, raw))


def min_crossing_distance(pos: Point2D, layout: BeamLayout, beam_index: int = 0) -> float:
    """Perpendicular distance from ``pos`` to the leading-edge line of a beam.

    Written in normal form, so it stays finite for a vertical edge.
    """
    if pos.x == 0.0 and pos.y == 0.0:
        raise DegenerateGeometryError("position coincides with the SBS")
    lead = layout.leading_edge(beam_index)
    return abs(pos.x * math.sin(lead) - pos.y * math.cos(lead))


def crossing_length(pos: Point2D, ray_direction, layout: BeamLayout, beam_index: int = 0):
    """Distance travelled from ``pos`` along ``ray_direction`` until the leading edge.

    ``ray_direction`` may be an array; every entry must produce a crossing of
    the leading-edge half-line at a non-negative distance.
    """
    if pos.x == 0.0 and pos.y == 0.0:
        raise DegenerateGeometryError("position coincides with the SBS")
    lead = layout.leading_edge(beam_index)
    c0, s0 = math.cos(lead), math.sin(lead)
    direction = np.asarray(ray_direction, dtype=float)
    denom = np.sin(lead - direction)
    if np.any(np.abs(denom) < 1e-15):
        raise NoCrossingError("ray is parallel to the leading edge")
    dist = (pos.y * c0 - pos.x * s0) / denom
    if np.any(dist < 0.0):
        raise NoCrossingError("leading edge lies behind the ray origin")
    # intersection must land on the edge half-line, not its extension through the SBS
    along = (pos.x + dist * np.cos(direction)) * c0 + (pos.y + dist * np.sin(direction)) * s0
    if np.any(along < -1e-9 * max(1.0, pos.norm)):
        raise NoCrossingError("ray meets the leading-edge line behind the SBS")
    if dist.ndim == 0:
        return float(dist)
    return dist


def chord_length_pdf(d, cell_radius: float):
    """Density of the chord length from a fixed boundary point at a uniform angle."""
    d = np.asarray(d, dtype=float)
    if cell_radius <= 0.0:
        raise DomainError("cell_radius must be positive")
    if np.any(d < 0.0) or np.any(d >= 2.0 * cell_radius):
        raise DomainError(f"chord length must lie in [0, {2.0 * cell_radius})")
    out = 2.0 / (math.pi * np.sqrt(4.0 * cell_radius**2 - d**2))
    return float(out) if out.ndim == 0 else out


def chord_length_cdf(d, cell_radius: float):
    """Closed-form CDF matching :func:`chord_length_pdf`; saturates at 1 for d >= 2a."""
    d = np.asarray(d, dtype=float)
    ratio = np.clip(d / (2.0 * cell_radius), 0.0, 1.0)
    out = (2.0 / math.pi) * np.arcsin(ratio)
    return float(out) if out.ndim == 0 else out


def circle_entry_crossing(entry: Point2D, direction: float, cell_radius: float) -> float:
    """Chord length traversed from a boundary point of the cell along ``direction``.

    Tangent or outward headings give 0 and raise a :class:`DiagnosticWarning`.
    """
    if cell_radius <= 0.0:
        raise DomainError("cell_radius must be positive")
    if abs(entry.norm - cell_radius) > 1e-9 * cell_radius:
        raise DomainError(f"entry point is not on the circle of radius {cell_radius}")
    inward = -(entry.x * math.cos(direction) + entry.y * math.sin(direction))
    if inward <= 1e-12 * cell_radius:
        warnings.warn("heading is tangent or outward; chord has zero length", DiagnosticWarning,
                      stacklevel=2)
        return 0.0
    return 2.0 * inward
