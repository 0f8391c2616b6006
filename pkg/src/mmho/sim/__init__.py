from .engine import ExperimentResult, HoParams, HoState, SimConfig, Simulation, run_trial, run_trials
from .topology import NetworkTopology, generate_topology, mean_nearest_neighbor_distance

__all__ = [
    "ExperimentResult", "HoParams", "HoState", "NetworkTopology", "SimConfig", "Simulation",
    "generate_topology", "mean_nearest_neighbor_distance", "run_trial", "run_trials",
]
