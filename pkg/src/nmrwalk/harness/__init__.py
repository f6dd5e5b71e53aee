"""Experiment driver: configs, runs, sweeps and report output."""

from .config import ConfigError, ContractViolation, ExperimentConfig, load_config
from .report import StepRecord, SweepTable, WalkReport, emit
from .run import run, sweep_decoherence

__all__ = [
    "ConfigError",
    "ContractViolation",
    "ExperimentConfig",
    "StepRecord",
    "SweepTable",
    "WalkReport",
    "emit",
    "load_config",
    "run",
    "sweep_decoherence",
]
