"""
Finite-difference solutions on a uniform space-time grid
"""

from typing import Any, Dict, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class GridSolution(BaseModel):
    """
    u(t_n, x_j) from an explicit order-1 upwind march

    values has one row per time level, norms the discrete L2 norm of each row.
    source_norms holds ||f(t_n)|| on the same levels.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dt: float = Field(..., gt=0)
    dx: float = Field(..., gt=0)
    times: np.ndarray
    nodes: np.ndarray
    values: np.ndarray
    norms: np.ndarray
    source_norms: np.ndarray
    cfl: float
    scheme: Literal["upwind-1"] = "upwind-1"
    meta: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("times", "nodes", "norms", "source_norms", mode="before")
    @classmethod
    def _coerce_vector(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=float).reshape(-1)

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value: Any) -> np.ndarray:
        return np.atleast_2d(np.asarray(value, dtype=float))

    @model_validator(mode="after")
    def _check_shapes(self) -> "GridSolution":
        if self.values.shape != (self.times.size, self.nodes.size):
            raise ValueError("values must have one row per time and one column per node")
        if self.cfl > 1.0 + 1e-12:
            raise ValueError(f"CFL number {self.cfl:.3f} exceeds 1")
        return self

    def at(self, t: float) -> np.ndarray:
        """Row of the nearest time level"""
        return self.values[int(np.argmin(np.abs(self.times - t)))]

    def summary(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme,
            "dt": self.dt,
            "dx": self.dx,
            "cfl": self.cfl,
            "levels": int(self.times.size),
            "nodes": int(self.nodes.size),
            "norm_first": float(self.norms[0]),
            "norm_last": float(self.norms[-1]),
        }
