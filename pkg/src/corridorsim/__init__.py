"""Deterministic arterial-corridor microsimulation and signal-control benchmark."""

__version__ = "0.1.0"

from corridorsim.network import Network, Link, Intersection, Phase, load_network
from corridorsim.scenario import Scenario, ScenarioError, load_scenario
from corridorsim.signal_core import Face, SignalPlan
from corridorsim.runner import run_single, run_benchmark

__all__ = [
    "Network",
    "Link",
    "Intersection",
    "Phase",
    "load_network",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "Face",
    "SignalPlan",
    "run_single",
    "run_benchmark",
    "__version__",
]
