"""Desk-scale EV charging-site planning: hex grid, learned centrality, greedy
coverage, queue sizing, reachability repair, forecasting and equity reports."""

from .config import default_config, load_config
from .pipeline import BuildPlan, run

__all__ = ["BuildPlan", "default_config", "load_config", "run"]
__version__ = "0.1.0"
