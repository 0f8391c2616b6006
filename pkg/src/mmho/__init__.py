"""Caching-assisted handover analysis and simulation for joint microwave/mmW networks."""

__version__ = "0.1.0"
