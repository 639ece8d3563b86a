"""
Convex bodies and set-valued paths, represented through support functions
"""

from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.optimize import linprog

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError, NumericalFailureError
from nsflow.utils.grids import direction_grid, normalize

BodyKind = Literal["point", "ball", "interval-product", "polytope", "sampled"]


def _as_float_array(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=float)


class ConvexBody(BaseModel):
    """
    Closed convex subset of R^n given by its support function on a direction grid

    Bodies built from generators (points, balls, boxes, polytopes) also keep the
    exact form h(w) = max_v <v, w> + radius |w|, so off-grid directions are exact.
    Sampled bodies answer off-grid directions with the outer polyhedral bound.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dim: int = Field(..., ge=1)
    kind: BodyKind
    grid: np.ndarray
    support: np.ndarray
    vertices: Optional[np.ndarray] = None
    radius: float = 0.0

    @field_validator("grid", "support", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_float_array(value)

    @field_validator("vertices", mode="before")
    @classmethod
    def _coerce_vertices(cls, value: Any) -> Optional[np.ndarray]:
        return None if value is None else np.atleast_2d(_as_float_array(value))

    # Construction

    @classmethod
    def from_generators(
        cls, vertices: np.ndarray, radius: float = 0.0, kind: BodyKind = "polytope", grid: Optional[np.ndarray] = None
    ) -> "ConvexBody":
        """Exact body conv(vertices) + radius * unit ball"""
        vertices = np.atleast_2d(_as_float_array(vertices))
        dim = vertices.shape[1]
        grid = direction_grid(dim) if grid is None else _as_float_array(grid)
        support = np.max(grid @ vertices.T, axis=1) + radius
        return cls(dim=dim, kind=kind, grid=grid, support=support, vertices=vertices, radius=float(radius))

    @classmethod
    def sampled(cls, grid: np.ndarray, support: np.ndarray) -> "ConvexBody":
        grid = normalize(grid)
        support = _as_float_array(support).reshape(-1)
        if support.shape[0] != grid.shape[0]:
            raise InvalidArgumentError("support values must match grid", grid=grid.shape[0], support=support.shape[0])
        return cls(dim=grid.shape[1], kind="sampled", grid=grid, support=support)

    # Queries

    @property
    def exact(self) -> bool:
        return self.vertices is not None

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.support)))

    @property
    def magnitude(self) -> float:
        """|M| = sup over grid directions of |h_M|"""
        return float(np.max(np.abs(self.support)))

    def support_at(self, directions: np.ndarray) -> np.ndarray:
        """Support values at arbitrary directions (normalized first)"""
        w = normalize(directions)
        if w.shape[1] != self.dim:
            raise InvalidArgumentError("direction dimension mismatch", expected=self.dim, got=w.shape[1])
        if self.exact:
            return np.max(w @ self.vertices.T, axis=1) + self.radius

        out = np.empty(w.shape[0])
        cosines = w @ self.grid.T
        best = np.argmax(cosines, axis=1)
        for i, (row, j) in enumerate(zip(w, best)):
            if cosines[i, j] >= 1.0 - 1e-12:
                out[i] = self.support[j]
            else:
                out[i] = self._outer_support(row)
        return out

    def _outer_support(self, w: np.ndarray) -> float:
        """max <x, w> over the polyhedron cut out by the grid half-spaces"""
        finite = np.isfinite(self.support)
        result = linprog(
            c=-w,
            A_ub=self.grid[finite],
            b_ub=self.support[finite],
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        if result.status == 3:
            return float("inf")
        if result.status != 0:
            raise NumericalFailureError("support LP failed", status=int(result.status), message=result.message)
        return float(-result.fun)

    def contains(self, point: np.ndarray, tol: Optional[float] = None) -> bool:
        """x in M iff <x, w> <= h(w) + tol on every grid direction"""
        tol = settings.membership_tol if tol is None else tol
        point = np.atleast_1d(_as_float_array(point))
        return bool(np.all(self.grid @ point <= self.support + tol))

    def violation(self, point: np.ndarray) -> float:
        """Largest support-inequality excess of a point (0 when inside)"""
        point = np.atleast_1d(_as_float_array(point))
        return float(max(0.0, np.max(self.grid @ point - self.support)))

    def chebyshev_center(self) -> np.ndarray:
        """Center of the largest ball inside the grid polyhedron"""
        if self.dim == 1:
            h = dict(zip(self.grid[:, 0], self.support))
            return np.array([0.5 * (h[1.0] - h[-1.0])])
        if self.exact and self.kind in ("point", "ball"):
            return self.vertices[0].copy()

        finite = np.isfinite(self.support)
        grid = self.grid[finite]
        a_ub = np.hstack([grid, np.ones((grid.shape[0], 1))])
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        result = linprog(
            c=c,
            A_ub=a_ub,
            b_ub=self.support[finite],
            bounds=[(None, None)] * self.dim + [(0.0, None)],
            method="highs",
        )
        if result.status != 0:
            raise NumericalFailureError("Chebyshev center LP failed", status=int(result.status))
        return np.asarray(result.x[: self.dim])

    def is_consistent(self, tol: float = 1e-9) -> bool:
        """
        Grid values form a genuine support function

        Line: the interval is non-empty. Plane: every vertex of adjacent
        half-plane pairs satisfies all half-space inequalities. Otherwise the
        outer LP value must reproduce each stored value.
        """
        if not self.bounded:
            return True
        if self.dim == 1:
            h = dict(zip(self.grid[:, 0], self.support))
            return bool(h[1.0] + h[-1.0] >= -tol)
        if self.dim == 2:
            order = np.argsort(np.arctan2(self.grid[:, 1], self.grid[:, 0]))
            g, h = self.grid[order], self.support[order]
            nxt = np.roll(np.arange(len(h)), -1)
            for i, j in zip(range(len(h)), nxt):
                matrix = np.vstack([g[i], g[j]])
                if abs(np.linalg.det(matrix)) < 1e-14:
                    continue
                vertex = np.linalg.solve(matrix, np.array([h[i], h[j]]))
                if np.any(g @ vertex > h + tol):
                    return False
            return True
        return all(self._outer_support(w) >= h - tol for w, h in zip(self.grid, self.support))

    # Serialization

    def to_json(self) -> Dict[str, Any]:
        return {"dim": self.dim, "kind": self.kind, "grid": self.grid.tolist(), "support": self.support.tolist()}

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "ConvexBody":
        grid = np.asarray(payload["grid"], dtype=float).reshape(-1, int(payload["dim"]))
        return cls(dim=int(payload["dim"]), kind=payload["kind"], grid=grid, support=payload["support"])


SupportFunction = Callable[[float, np.ndarray], np.ndarray]


class SetValuedPath(BaseModel):
    """
    Time-dependent convex body tau -> F_tau on [t0, t1] with integrable majorant

    support_fn(tau, W) returns h(F_tau, w) for each row w of W.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dim: int = Field(..., ge=1)
    t0: float
    t1: float
    support_fn: SupportFunction
    bound: Callable[[float], float]
    grid: np.ndarray
    breaks: Tuple[float, ...] = ()

    @field_validator("grid", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_float_array(value)

    @classmethod
    def constant(cls, body: ConvexBody, t0: float, t1: float) -> "SetValuedPath":
        magnitude = body.magnitude
        return cls(
            dim=body.dim,
            t0=t0,
            t1=t1,
            support_fn=lambda tau, w: body.support_at(w),
            bound=lambda tau: magnitude,
            grid=body.grid,
        )

    @classmethod
    def from_bodies(
        cls,
        body_at: Callable[[float], ConvexBody],
        t0: float,
        t1: float,
        bound: Callable[[float], float],
        breaks: Tuple[float, ...] = (),
    ) -> "SetValuedPath":
        probe = body_at(t0)
        return cls(
            dim=probe.dim,
            t0=t0,
            t1=t1,
            support_fn=lambda tau, w: body_at(tau).support_at(w),
            bound=bound,
            grid=probe.grid,
            breaks=tuple(breaks),
        )

    def covers(self, a: float, b: float) -> bool:
        lo, hi = min(a, b), max(a, b)
        return self.t0 - 1e-12 <= lo and hi <= self.t1 + 1e-12

    def support(self, tau: float, directions: Optional[np.ndarray] = None) -> np.ndarray:
        directions = self.grid if directions is None else normalize(directions)
        return np.asarray(self.support_fn(tau, directions), dtype=float)

    def body_at(self, tau: float) -> ConvexBody:
        return ConvexBody.sampled(self.grid, self.support(tau))

    def bound_violations(self, times: List[float]) -> List[float]:
        """Times where |F_tau| exceeds beta(tau)"""
        return [tau for tau in times if np.max(np.abs(self.support(tau))) > self.bound(tau) + 1e-12]
