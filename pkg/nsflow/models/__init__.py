"""
Numerical domain models
"""

from .coefficient import Coefficient, EssentialHull
from .convex import ConvexBody, SetValuedPath
from .family import EpsFamily, GraphSlice, MollifiedField
from .grid import GridSolution
from .measure import MeasurePath, MeasureState, ProductKind, TestFunction, TestFunctionBank
from .microlocal import PhaseProblem
from .trajectory import FlowMap, SubShadow, Trajectory, TrajectoryEvent

__all__ = [
    "Coefficient",
    "EssentialHull",
    "ConvexBody",
    "SetValuedPath",
    "EpsFamily",
    "GraphSlice",
    "MollifiedField",
    "GridSolution",
    "MeasurePath",
    "MeasureState",
    "ProductKind",
    "TestFunction",
    "TestFunctionBank",
    "PhaseProblem",
    "FlowMap",
    "SubShadow",
    "Trajectory",
    "TrajectoryEvent",
]
