"""End-to-end CEI runs: configuration, trial loop, persistence, plots, CLI."""
from .config import RunConfig, load_config
from .runner import RunResult, initial_design, run_experiment, run_trial
from .plots import emit_plots

__all__ = ["RunConfig", "load_config", "RunResult", "initial_design", "run_experiment",
           "run_trial", "emit_plots"]
