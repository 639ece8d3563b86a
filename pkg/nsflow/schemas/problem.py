"""
Problem file schemas
"""

from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from nsflow.core.numerics_config import numerics


class StrictModel(BaseModel):
    """Base for ingested documents: unknown keys are rejected"""

    model_config = ConfigDict(extra="forbid")


def _as_formula_list(value):
    return [value] if isinstance(value, str) else value


class InequalitySpec(StrictModel):
    """Region constraint `expr op 0`"""

    expr: str
    op: Literal["<", "<=", ">", ">="] = "<"


class PieceSpec(StrictModel):
    region: List[InequalitySpec] = Field(default_factory=list)
    formula: List[str]

    @field_validator("formula", mode="before")
    @classmethod
    def _formula_list(cls, value):
        return _as_formula_list(value)


class SurfaceSpec(StrictModel):
    """
    Discontinuity surface g(t, x) = 0

    minus/plus are the one-sided limits from {g < 0} and {g > 0}; value is the
    Borel value on the surface itself. All three are optional.
    """

    expr: str
    minus: Optional[List[str]] = None
    plus: Optional[List[str]] = None
    value: Optional[List[str]] = None

    @field_validator("minus", "plus", "value", mode="before")
    @classmethod
    def _formula_lists(cls, value):
        return _as_formula_list(value)


class DomainSpec(StrictModel):
    """Sampling box used by condition checks and bounds"""

    t: Tuple[float, float] = (0.0, 2.0)
    x: List[Tuple[float, float]] = Field(default_factory=list)


class CoefficientSpec(StrictModel):
    """Coefficient DSL: piecewise closed-form right-hand side"""

    dim: int = Field(1, ge=1)
    pieces: List[PieceSpec] = Field(..., min_length=1)
    surfaces: List[SurfaceSpec] = Field(default_factory=list)
    bound: Optional[str] = None
    domain: DomainSpec = Field(default_factory=DomainSpec)

    @model_validator(mode="after")
    def _check_dimensions(self) -> "CoefficientSpec":
        for i, piece in enumerate(self.pieces):
            if len(piece.formula) != self.dim:
                raise ValueError(f"piece {i} has {len(piece.formula)} components, expected {self.dim}")
        for j, surface in enumerate(self.surfaces):
            for side in ("minus", "plus", "value"):
                formula = getattr(surface, side)
                if formula is not None and len(formula) != self.dim:
                    raise ValueError(f"surface {j} {side} has {len(formula)} components, expected {self.dim}")
        if self.domain.x and len(self.domain.x) != self.dim:
            raise ValueError("domain.x must give one interval per dimension")
        return self

    @classmethod
    def scalar(cls, formula: str, **kwargs) -> "CoefficientSpec":
        """One-piece scalar coefficient"""
        return cls(dim=1, pieces=[PieceSpec(formula=[formula])], **kwargs)


class MollifierSpec(StrictModel):
    """Mollifier kernel, scale law gamma_eps and the eps grid 2^-i"""

    kind: Literal["bump", "moment-vanishing", "one-sided", "gaussian"] = "bump"
    scale: Literal["identity", "log"] = "identity"
    eps_exponents: Tuple[int, int] = (4, 20)
    eps: Optional[List[float]] = None

    @field_validator("eps")
    @classmethod
    def _check_eps(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None:
            if any(e <= 0 or e > 1 for e in value):
                raise ValueError("eps values must lie in (0, 1]")
            if any(b >= a for a, b in zip(value, value[1:])):
                raise ValueError("eps values must be strictly decreasing")
        return value

    def eps_grid(self) -> List[float]:
        if self.eps is not None:
            return list(self.eps)
        first, last = self.eps_exponents
        return [2.0 ** -i for i in range(first, last + 1)]


class SamplingPlan(StrictModel):
    """Random sample cloud for condition checks"""

    points: int = Field(default_factory=lambda: int(numerics("rhsmodel")["points"]), ge=10)
    pairs: int = Field(default_factory=lambda: int(numerics("rhsmodel")["pairs"]), ge=10)
    near_fraction: float = Field(default_factory=lambda: float(numerics("rhsmodel")["near_fraction"]), ge=0, le=1)
    scales: List[float] = Field(default_factory=lambda: list(numerics("rhsmodel")["scales"]))
    seed: int = 0


class DensitySpec(StrictModel):
    """Piecewise polynomial: coeffs[j] are ascending powers of (x - breaks[j])"""

    breaks: List[float] = Field(default_factory=list)
    coeffs: List[List[float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_pieces(self) -> "DensitySpec":
        if self.breaks and len(self.coeffs) != len(self.breaks) - 1:
            raise ValueError("density needs one coefficient row per interval")
        if any(b <= a for a, b in zip(self.breaks, self.breaks[1:])):
            raise ValueError("density breaks must be increasing")
        return self


class MeasureStateSpec(StrictModel):
    atoms: List[Tuple[float, float]] = Field(default_factory=list)
    density: DensitySpec = Field(default_factory=DensitySpec)


class SolverOptions(StrictModel):
    method: Literal["caratheodory", "filippov", "regularized"] = "filippov"
    k0: Optional[int] = Field(None, ge=1)
    override: bool = False
    samples: Optional[int] = Field(None, ge=2)


class ProblemFile(StrictModel):
    """Problem document ingested by the command line"""

    name: str = "problem"
    description: Optional[str] = None
    coefficient: CoefficientSpec
    reaction: Optional[CoefficientSpec] = None
    source: Optional[CoefficientSpec] = None
    mollifier: Optional[MollifierSpec] = None
    initial: Optional[Union[List[float], MeasureStateSpec]] = None
    t0: float = 0.0
    window: Optional[Tuple[float, float]] = None
    options: SolverOptions = Field(default_factory=SolverOptions)
    sampling: Optional[SamplingPlan] = None
