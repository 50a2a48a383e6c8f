"""Benchmark harness for the lock-free and lock-based containers."""

from .config import BenchConfig, BenchUsageError
from .harness import ConservationError, TrialResult, figure_configs, run, run_trial
from .report import read_csv, report, summarize, write_csv

__all__ = [
    "BenchConfig",
    "BenchUsageError",
    "ConservationError",
    "TrialResult",
    "figure_configs",
    "read_csv",
    "report",
    "run",
    "run_trial",
    "summarize",
    "write_csv",
]
