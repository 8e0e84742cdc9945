"""Experiment driver: configuration, seeding, runs and report files."""

from .config import ConfigError, ExperimentConfig, derive_seed, load_config, parse_config
from .main import build_parser, main
from .runner import prepare_corpus, run_distributions, run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "build_parser",
    "derive_seed",
    "load_config",
    "main",
    "parse_config",
    "prepare_corpus",
    "run_distributions",
    "run_experiment",
]
