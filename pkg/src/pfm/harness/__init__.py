"""Experiment plumbing: configuration, datasets, synthetic data, persistence, CLI."""
from .config import ConfigError, ExperimentConfig
from .experiment import MetricsReport, ModelBundle, run_experiment, run_rotation
from .persist import load_model, save_model
from .synth import synth_generate

__all__ = ["ConfigError", "ExperimentConfig", "MetricsReport", "ModelBundle", "run_experiment",
           "run_rotation", "load_model", "save_model", "synth_generate"]
