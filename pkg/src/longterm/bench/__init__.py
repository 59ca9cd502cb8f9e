"""Metrics, replicated benchmark runs and sweep reports."""

from .config import BenchConfig, load_config, parse_config
from .metrics import MetricReport, ate_error, pehe
from .sweep import SweepResult, run_replicated, run_sweep, write_log, write_results

__all__ = [
    "BenchConfig",
    "MetricReport",
    "SweepResult",
    "ate_error",
    "load_config",
    "parse_config",
    "pehe",
    "run_replicated",
    "run_sweep",
    "write_log",
    "write_results",
]
