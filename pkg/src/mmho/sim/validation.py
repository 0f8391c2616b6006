"""Monte Carlo samplers that cross-check the closed-form results.

Each sampler draws trajectories and measures the quantity geometrically, so
it shares no formula with :mod:`mmho.analysis`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..analysis import CachingScenario
from ..errors import DomainError
from ..geometry import BeamLayout, crossing_length
from .engine import circle_crossing_fraction


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step function of a sample."""

    values: np.ndarray  # sorted

    @property
    def n(self) -> int:
        return self.values.size

    def __call__(self, x):
        out = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def ks_distance(self, cdf) -> float:
        """Kolmogorov-Smirnov distance to a continuous CDF given as a callable."""
        f = np.asarray(cdf(self.values), dtype=float)
        i = np.arange(1, self.n + 1)
        return float(max(np.max(i / self.n - f), np.max(f - (i - 1) / self.n)))


def empirical_cdf(samples) -> EmpiricalCdf:
    arr = np.sort(np.asarray(samples, dtype=float).ravel())
    if arr.size == 0:
        raise DomainError("empirical CDF needs at least one sample")
    return EmpiricalCdf(arr)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_caching_durations(scenario: CachingScenario, n: int, seed) -> np.ndarray:
    """Beam crossing times for headings uniform over the crossing range."""
    rng = _rng(seed)
    tk = scenario.beam_width
    theta_hat = rng.uniform(tk, math.pi, n)
    # drop the measure-zero endpoints where the path is parallel to an edge
    theta_hat = theta_hat[(theta_hat > tk) & (theta_hat < math.pi)]
    direction = scenario.beam.trailing_edge(scenario.beam_index) + theta_hat
    dist = crossing_length(scenario.position, direction, scenario.beam, scenario.beam_index)
    return np.asarray(dist) / scenario.speed


def walk_through_disk(entry_angle, heading, speed, radius, dt):
    """Step MUEs from boundary points until they leave the disk; returns the stay times.

    Positions advance by ``speed * dt``; the exit instant is interpolated
    within the last step.
    """
    entry_angle = np.asarray(entry_angle, dtype=float)
    heading = np.asarray(heading, dtype=float)
    px = radius * np.cos(entry_angle)
    py = radius * np.sin(entry_angle)
    ux, uy = np.cos(heading), np.sin(heading)
    stay = np.zeros(entry_angle.shape)
    active = np.arange(entry_angle.size)
    steps = 0
    while active.size:
        ddx, ddy = speed * dt * ux[active], speed * dt * uy[active]
        nx, ny = px[active] + ddx, py[active] + ddy
        out = nx * nx + ny * ny > radius * radius
        if out.any():
            idx = active[out]
            # first step may start exactly on the boundary: take the far root
            frac = circle_crossing_fraction(px[idx], py[idx], ddx[out], ddy[out], radius,
                                            np.zeros(idx.size, dtype=bool))
            stay[idx] = (steps + frac) * dt
        px[active], py[active] = nx, ny
        active = active[~out]
        steps += 1
    return stay


def sample_single_cell_stays(speed, radius, n, seed, dt=0.01) -> np.ndarray:
    """Time-of-stay of MUEs entering one cell at a uniform boundary point and angle.

    The heading makes a uniform angle in ``(0, pi)`` with the tangent at the
    entry point, so it always points into the cell.
    """
    rng = _rng(seed)
    entry = rng.uniform(0, 2 * math.pi, n)
    tangent_angle = rng.uniform(0, math.pi, n)
    # tangent direction at the entry, counter-clockwise, then turned inwards
    heading = entry + math.pi / 2 + tangent_angle
    return walk_through_disk(entry, heading, speed, radius, dt)


def simulate_single_cell_hof(speed, radius, mts, n, seed, dt=0.01):
    """Fraction of single-cell visits shorter than ``mts``, with its standard error."""
    stays = sample_single_cell_stays(speed, radius, n, seed, dt)
    p = float(np.mean(stays < mts))
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n)


def _segment_crosses_ray(p0x, p0y, p1x, p1y, ray_angle):
    """True where segment p0-p1 meets the half-line from the origin at ``ray_angle``."""
    cx, cy = math.cos(ray_angle), math.sin(ray_angle)
    s0 = cx * p0y - cy * p0x
    s1 = cx * p1y - cy * p1x
    straddles = (s0 * s1) <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = s0 / (s0 - s1)
    t = np.where(np.isfinite(t), t, 0.0)
    hx, hy = p0x + t * (p1x - p0x), p0y + t * (p1y - p0y)
    return straddles & (hx * cx + hy * cy >= 0)


def _in_sector(x, y, layout: BeamLayout):
    az = np.arctan2(y, x)
    hit = np.zeros(np.shape(x), dtype=bool)
    for i in range(layout.n_beams):
        lead = layout.leading_edge(i)
        back = np.mod(lead - az, 2 * math.pi)
        hit |= back <= layout.beam_width
    return hit


def simulate_beam_crossings(layout: BeamLayout, n, seed) -> np.ndarray:
    """Whether MUEs entering the cell (uniform point, uniform heading) touch a beam.

    A heading pointing out of the cell leaves at once, so it counts only when
    the entry point already sits in a beam.
    """
    rng = _rng(seed)
    a = layout.cell_radius
    phi = rng.uniform(0, 2 * math.pi, n)
    heading = rng.uniform(0, 2 * math.pi, n)
    p0x, p0y = a * np.cos(phi), a * np.sin(phi)
    ux, uy = np.cos(heading), np.sin(heading)
    inward = -(p0x * ux + p0y * uy)
    chord = np.where(inward > 0, 2 * inward, 0.0)
    p1x, p1y = p0x + chord * ux, p0y + chord * uy
    hit = _in_sector(p0x, p0y, layout) | (_in_sector(p1x, p1y, layout) & (chord > 0))
    for i in range(layout.n_beams):
        for edge in (layout.leading_edge(i), layout.trailing_edge(i)):
            hit |= (chord > 0) & _segment_crosses_ray(p0x, p0y, p1x, p1y, edge)
    return hit
