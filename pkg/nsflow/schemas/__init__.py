"""
Pydantic schemas for problem files and reports
"""

from .problem import CoefficientSpec, DomainSpec, MeasureStateSpec, MollifierSpec, ProblemFile, SolverOptions
from .reports import (
    CheckSummary,
    ConditionReport,
    ContainmentReport,
    DecayReport,
    EnergyReport,
    GardingReport,
    ResidualReport,
    WavefrontEstimate,
)

__all__ = [
    "CoefficientSpec",
    "DomainSpec",
    "MeasureStateSpec",
    "MollifierSpec",
    "ProblemFile",
    "SolverOptions",
    "CheckSummary",
    "ConditionReport",
    "ContainmentReport",
    "DecayReport",
    "EnergyReport",
    "GardingReport",
    "ResidualReport",
    "WavefrontEstimate",
]
