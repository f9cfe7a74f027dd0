"""Experiment harness: configuration, sweep runners, and the CLI."""

from .config import (ErrorMapSettings, ExperimentConfig, ResetDemoSettings,
                     ShootoutSettings, load_config)
from .runners import (error_map, estimator_shootout, reset_demo,
                      run_protocol_rows, sweep_bits, sweep_resources,
                      task_rng)

__all__ = [
    "ErrorMapSettings", "ExperimentConfig", "ResetDemoSettings",
    "ShootoutSettings", "load_config",
    "error_map", "estimator_shootout", "reset_demo", "run_protocol_rows",
    "sweep_bits", "sweep_resources", "task_rng",
]
