"""Random SBS placement around a central MBS."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..geometry import BeamLayout, Point2D
from ..radio import LinkBudget

MAX_PLACEMENT_ATTEMPTS = 100_000


@dataclass(frozen=True)
class NetworkTopology:
    positions: np.ndarray  # (K, 2)
    beams: tuple[BeamLayout, ...]
    link: LinkBudget
    area_radius: float
    min_intercell_distance: float
    mbs_position: Point2D = Point2D(0.0, 0.0)
    mbs_link: LinkBudget | None = None

    @property
    def num_sbs(self) -> int:
        return len(self.beams)

    @property
    def sbs_list(self) -> list[tuple[Point2D, BeamLayout, LinkBudget]]:
        return [(Point2D(float(x), float(y)), beam, self.link)
                for (x, y), beam in zip(self.positions, self.beams)]

    @property
    def base_azimuths(self) -> np.ndarray:
        return np.array([b.base_azimuth for b in self.beams])


def generate_topology(seed, k: int, area_radius: float, min_dist: float, beam: BeamLayout,
                      link: LinkBudget, mbs_link: LinkBudget | None = None) -> NetworkTopology:
    """Uniform SBS positions in a disk, conditioned on a minimum pairwise distance.

    ``seed`` is an int, a ``SeedSequence`` or a ``Generator``. Each SBS gets its
    own fixed beam azimuth, drawn uniformly.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if k < 1:
        raise ConfigError(f"number of SBSs must be positive, got {k}")
    points = np.empty((k, 2))
    placed = 0
    attempts = 0
    while placed < k:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise ConfigError(
                f"could not place {k} SBSs {min_dist} m apart in a {area_radius} m disk "
                f"({placed} placed after {attempts} attempts)"
            )
        attempts += 1
        rad = area_radius * math.sqrt(rng.random())
        ang = 2.0 * math.pi * rng.random()
        cand = np.array([rad * math.cos(ang), rad * math.sin(ang)])
        if placed and np.min(np.hypot(*(points[:placed] - cand).T)) < min_dist:
            continue
        points[placed] = cand
        placed += 1
    azimuths = rng.uniform(0.0, 2.0 * math.pi, size=k)
    beams = tuple(BeamLayout(beam.n_beams, beam.beam_width, float(az), beam.cell_radius)
                  for az in azimuths)
    return NetworkTopology(points, beams, link, area_radius, min_dist, mbs_link=mbs_link)


def mean_nearest_neighbor_distance(topology: NetworkTopology) -> float:
    """Average distance from each SBS to its closest neighbour."""
    if topology.num_sbs < 2:
        raise ConfigError("need at least two SBSs for an inter-cell distance")
    diff = topology.positions[:, None, :] - topology.positions[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    return float(np.mean(dist.min(axis=1)))
