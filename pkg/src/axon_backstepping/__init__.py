"""Backstepping boundary control of a growing axon."""
from .config import BioParams, ConfigError, ControlParams, RunRecord, ScenarioConfig, load_config
from .simulator import Plant, SimState, build_plant, discrete_equilibrium, run, step
from .steady import SteadyState, build_steady_state, c_eq

__all__ = [
    "BioParams",
    "ConfigError",
    "ControlParams",
    "Plant",
    "RunRecord",
    "ScenarioConfig",
    "SimState",
    "SteadyState",
    "build_plant",
    "build_steady_state",
    "c_eq",
    "discrete_equilibrium",
    "load_config",
    "run",
    "step",
]
