"""Simulator for two-hop relay uplinks with multipoint connectivity."""

from .baselines import SchemeId, run_scheme
from .ndt import IterationTrace, NDTParams, run
from .ratecalc import NetworkState, network_capacity
from .scenario import ChannelRealization, ConfigError, ScenarioConfig, ScenarioError, generate

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization", "ConfigError", "IterationTrace", "NDTParams", "NetworkState", "ScenarioConfig",
    "ScenarioError", "SchemeId", "generate", "network_capacity", "run", "run_scheme",
]
