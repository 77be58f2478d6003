"""Configured experiments, reports and the command-line entry point."""

from .config import EXPERIMENTS, load_config
from .experiments import run_experiment, run_named
from .report import Report, emit_report

__all__ = ["EXPERIMENTS", "load_config", "run_experiment", "run_named", "Report", "emit_report"]
