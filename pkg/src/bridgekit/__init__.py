"""Schrödinger bridges on finite state spaces: Sinkhorn scaling, multi-step
bridges over Markov priors, maximal-entropy routing and 1-D entropic
interpolation."""

from .core import (
    Coupling,
    Distribution,
    Kernel,
    NodeSet,
    PathMeasure,
    WeightedDigraph,
    dirac,
    format_path,
    validate_distribution,
)
from .dynamic_bridge import BridgeProblem, solve_bridge
from .errors import BridgeError, ComputationError, InputError
from .routing import RoutingRequest, plan_route, temperature_sweep
from .scaling import ScalingProblem, solve_schrodinger_system

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "BridgeProblem",
    "ComputationError",
    "Coupling",
    "Distribution",
    "InputError",
    "Kernel",
    "NodeSet",
    "PathMeasure",
    "RoutingRequest",
    "ScalingProblem",
    "WeightedDigraph",
    "dirac",
    "format_path",
    "plan_route",
    "solve_bridge",
    "solve_schrodinger_system",
    "temperature_sweep",
    "validate_distribution",
]
