"""Training runs, sweeps, landscapes, results files and the CLI."""

from .config import ExperimentConfig
from .data import ExperimentData, build_data
from .evaluate import LeakageError, evaluate_ood, fit_md_stats
from .landscape import LandscapeSpec, render_landscape
from .results import read_results, write_results
from .sweep import SweepRecord, run_grid, sweep_mix, sweep_r
from .train import History, NumericError, train_run

__all__ = [
    "ExperimentConfig",
    "ExperimentData",
    "build_data",
    "LeakageError",
    "evaluate_ood",
    "fit_md_stats",
    "LandscapeSpec",
    "render_landscape",
    "read_results",
    "write_results",
    "SweepRecord",
    "run_grid",
    "sweep_mix",
    "sweep_r",
    "History",
    "NumericError",
    "train_run",
]
