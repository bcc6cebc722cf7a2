"""Scenario configuration, sweeps, consistency checks and the CLI."""

from .config import ScenarioConfig, from_dict, load_config, preset_config
from .results import SCHEMA, emit, load_json
from .presets import PRESETS
from .runner import (ArrowCheck, SweepResult, consistency_suite, convergence_sweep, fit_rate,
                     monte_carlo_random_graph, run_scenario, simulate, solve_reference_continuum)

__all__ = [
    "ArrowCheck", "PRESETS", "SCHEMA", "ScenarioConfig", "SweepResult", "consistency_suite",
    "convergence_sweep", "emit", "fit_rate", "from_dict", "load_config", "load_json",
    "monte_carlo_random_graph", "preset_config", "run_scenario", "simulate",
    "solve_reference_continuum",
]
