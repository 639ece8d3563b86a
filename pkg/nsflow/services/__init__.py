"""
Solvers, checkers and estimators
"""

from .caratheodory_solver import CaratheodorySolver
from .condition_checker import ConditionChecker
from .energy_service import EnergySolver
from .filippov_solver import FilippovSolver
from .flow_service import FlowBuilder
from .generalized_graph import GeneralizedGraph
from .microlocal_service import CharacteristicMap, OscillatoryIntegrator, WavefrontEstimator
from .regularized_solver import RegularizedSolver
from .transport_service import MeasureTransport, Resolvent

__all__ = [
    "CaratheodorySolver",
    "ConditionChecker",
    "EnergySolver",
    "FilippovSolver",
    "FlowBuilder",
    "GeneralizedGraph",
    "CharacteristicMap",
    "OscillatoryIntegrator",
    "WavefrontEstimator",
    "RegularizedSolver",
    "MeasureTransport",
    "Resolvent",
]
