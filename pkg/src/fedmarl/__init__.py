"""Desk-scale wireless network lab for federated multi-agent actor-critic training."""

from .config import ExperimentConfig
from .env import WirelessEnv
from .harness import run_experiment, run_matrix

__all__ = ["ExperimentConfig", "WirelessEnv", "run_experiment", "run_matrix"]
__version__ = "0.1.0"
