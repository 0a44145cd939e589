"""Hybrid adaptive operator selection for differential evolution and CVRPTW local search."""

from .core import ConfigError, DimensionError, FormatError, PlanError, UnknownFunctionError, improvement, rng_stream
from .hybrid import DecisionPolicy, HybridController, PolicyMode, adjust_p, choose_module, make_controller
from .stateless import StatelessAos, assign_credit
from .statebased import DdqnAgent, DdqnConfig, QNetwork, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DimensionError", "FormatError", "PlanError", "UnknownFunctionError",
    "improvement", "rng_stream", "DecisionPolicy", "HybridController", "PolicyMode",
    "adjust_p", "choose_module", "make_controller", "StatelessAos", "assign_credit",
    "DdqnAgent", "DdqnConfig", "QNetwork", "load_model", "save_model",
]
