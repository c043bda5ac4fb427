"""Certified finite-volume solver for 1D scalar conservation laws with a posteriori error bounds."""
from .harness import ExperimentConfig, load_config, parse_config, run_experiment
from .pipeline import RunResult, RunSettings, Simulation, run

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "RunSettings",
    "Simulation",
    "load_config",
    "parse_config",
    "run",
    "run_experiment",
]
