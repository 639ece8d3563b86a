"""
Report schemas emitted by checks, solvers and diagnostics
"""

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

Theory = Literal["CC", "FC", "forward-OSL", "backward-OSL", "HS", "DiPernaLions"]
Verdict = Literal["pass", "fail", "inconclusive"]
ProductTag = Literal["poupaud-rascle", "bouchut-james", "model"]


class Witness(BaseModel):
    """Sampled point (and partner point for pair tests) exhibiting a violation"""

    t: Optional[float] = None
    x: List[float]
    y: Optional[List[float]] = None
    value: Optional[float] = None
    note: str = ""


class ConditionReport(BaseModel):
    theory: Theory
    verdict: Verdict
    witnesses: List[Witness] = Field(default_factory=list)
    constants: Dict[str, Any] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _fail_has_witness(self) -> "ConditionReport":
        if self.verdict == "fail" and not self.witnesses:
            raise ValueError("a fail verdict needs at least one witness")
        return self

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


class CheckSummary(BaseModel):
    """Aggregated condition reports for one problem"""

    problem: str
    reports: List[ConditionReport]

    def verdict(self, theory: str) -> Optional[str]:
        for report in self.reports:
            if report.theory == theory:
                return report.verdict
        return None


class InclusionReport(BaseModel):
    """Worst excess of <xi(s) - xi(r), w> over the integrated essential support"""

    max_violation: float
    tolerance: float
    directions: int
    samples: int
    worst_direction: Optional[List[float]] = None
    worst_times: Optional[Tuple[float, float]] = None

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


class ShadowReport(BaseModel):
    verdict: Literal["converged", "subnet-selected", "diverged"]
    eps_used: List[float]
    convergence: List[float]
    tolerance: float
    filippov_residual: Optional[float] = None
    shadow_residual: Optional[float] = None


class SemigroupReport(BaseModel):
    """max |chi_r(s, chi_t(r, x)) - chi_t(s, x)| over a test grid"""

    max_error: float
    tolerance: float
    cases: int
    shift_error: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance and (self.shift_error is None or self.shift_error < self.tolerance)


class JacobianReport(BaseModel):
    time: float
    point: List[float]
    jacobian: List[List[float]]
    determinant: float
    expected_determinant: float
    divergence_integral: float
    error: float


class CompositionReport(BaseModel):
    base_x: List[float]
    contained: bool
    worst_violation: float
    tolerance: float
    composed_points: List[List[float]]
    bound_points: List[List[float]]


class PairingRow(BaseModel):
    index: int
    product: float
    reference: Optional[float] = None
    difference: Optional[float] = None


class PairingTable(BaseModel):
    product: ProductTag
    rows: List[PairingRow]

    @property
    def max_difference(self) -> float:
        diffs = [abs(r.difference) for r in self.rows if r.difference is not None]
        return max(diffs) if diffs else 0.0


class ResidualReport(BaseModel):
    product: ProductTag
    pairings: List[float]
    max_residual: float


class ResolventReport(BaseModel):
    mu: Tuple[float, float]
    residual: float
    c0: float
    c1: float
    ratios: List[float]
    bounds: List[float]

    @property
    def passed(self) -> bool:
        return all(r <= b * (1.0 + 1e-6) for r, b in zip(self.ratios, self.bounds))


class EnergyReport(BaseModel):
    verdict: Verdict
    h: float
    slack: float
    times: List[float]
    lhs: List[float]
    rhs: List[float]

    @property
    def worst_ratio(self) -> float:
        return max((l / r for l, r in zip(self.lhs, self.rhs) if r > 0), default=0.0)


class GardingReport(BaseModel):
    mode: Literal["power", "log", "coefficient"]
    alpha: Optional[float] = None
    eps: List[float]
    values: List[float]
    slope: float
    constant: Optional[float] = None


class DecayReport(BaseModel):
    """Oscillatory-integral moduli against the stationary-phase bound curves"""

    eps: float
    omegas: List[float]
    values: List[float]
    grad_bound: float
    bounds: Dict[int, List[float]]
    verdicts: Dict[int, Literal["pass", "fail", "refused"]]
    empirical_slope: float
    constants: Dict[int, float] = Field(default_factory=dict)
    onset: float = 1.0


class RescalingReport(BaseModel):
    """I at phase phi / sigma and frequency omega against I at phase phi and omega / sigma"""

    sigmas: List[float]
    omegas: List[float]
    relative_errors: List[float]
    ratio_slopes: Dict[int, float] = Field(default_factory=dict)

    @property
    def max_relative_error(self) -> float:
        return max(self.relative_errors)


class WavefrontPoint(BaseModel):
    base: List[float]
    irregular: List[int]
    slopes: List[float]


class WavefrontEstimate(BaseModel):
    """Irregular direction indices per base point on a fixed direction grid"""

    directions: List[List[float]]
    points: List[WavefrontPoint]
    threshold: float
    eps: List[float]

    def irregular_at(self, base: List[float], tol: float = 1e-9) -> List[int]:
        for point in self.points:
            if max(abs(a - b) for a, b in zip(point.base, base)) <= tol:
                return point.irregular
        return []

    @property
    def singular_support(self) -> List[List[float]]:
        return [p.base for p in self.points if p.irregular]


class ContainmentReport(BaseModel):
    contained: bool
    violations: List[Dict[str, Any]] = Field(default_factory=list)
    estimate: WavefrontEstimate
