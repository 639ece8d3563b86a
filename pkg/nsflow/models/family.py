"""
Eps-families: finite-grid representatives of generalized functions
"""

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.core.expressions import EPS, CompiledExpression, parse_formula, state_symbols
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import Coefficient
from nsflow.models.convex import ConvexBody
from nsflow.models.trajectory import Trajectory
from nsflow.schemas.problem import MollifierSpec
from nsflow.utils.mollifiers import KERNELS, SCALE_LAWS, SUPPORTS
from nsflow.utils.quadrature import panel_rule

ValueFunction = Callable[[float, np.ndarray], np.ndarray]


def _as_rows(X: Any, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        return X.reshape(1, 1)
    if X.ndim == 1:
        return X.reshape(1, -1) if dim > 1 and X.size == dim else X.reshape(-1, dim)
    return X


class EpsFamily:
    """
    eps -> F_eps on a decreasing geometric eps grid

    value_at(eps, X) maps (M, dim_in) points to (M, dim_out) values and must
    be safe to call from several threads. cbound maps a compact (box per
    coordinate) to the declared bound box of its image.
    """

    def __init__(
        self,
        eps_grid: Sequence[float],
        value_fn: ValueFunction,
        dim_in: int = 1,
        dim_out: int = 1,
        natural: bool = False,
        cbound: Optional[Dict[Tuple[Tuple[float, float], ...], Tuple[Tuple[float, float], ...]]] = None,
        name: str = "family",
    ):
        grid = np.asarray(eps_grid, dtype=float)
        if grid.size == 0 or np.any(grid <= 0) or np.any(grid > 1):
            raise InvalidArgumentError("eps grid must be a non-empty subset of (0, 1]", eps_grid=grid.tolist())
        if np.any(np.diff(grid) >= 0):
            raise InvalidArgumentError("eps grid must be strictly decreasing", eps_grid=grid.tolist())
        self.eps_grid = grid
        self._value_fn = value_fn
        self.dim_in = dim_in
        self.dim_out = dim_out
        self.natural = natural
        self.cbound = dict(cbound or {})
        self.name = name

    def value_at(self, eps: float, X: Any) -> np.ndarray:
        rows = _as_rows(X, self.dim_in)
        values = np.asarray(self._value_fn(float(eps), rows), dtype=float)
        return values.reshape(rows.shape[0], self.dim_out)

    # Constructors

    @classmethod
    def from_expressions(
        cls,
        formulas,
        dim_in: int = 1,
        eps_grid: Optional[Sequence[float]] = None,
        natural: bool = False,
        name: str = "",
    ) -> "EpsFamily":
        """Family given by closed-form formulas over eps and x1..xn"""
        texts = [formulas] if isinstance(formulas, str) else list(formulas)
        variables = [EPS, *state_symbols(dim_in)]
        compiled = [
            CompiledExpression(parse_formula(text, dim_in, with_time=False, with_eps=True), variables) for text in texts
        ]

        def value_fn(eps: float, X: np.ndarray) -> np.ndarray:
            return np.column_stack([f(eps, *X.T) for f in compiled])

        name = name or "; ".join(texts)
        return cls(_default_grid(eps_grid), value_fn, dim_in, len(texts), natural=natural, name=name)

    @classmethod
    def from_function(
        cls, fn: ValueFunction, dim_in: int = 1, dim_out: int = 1, eps_grid: Optional[Sequence[float]] = None, **kwargs
    ) -> "EpsFamily":
        return cls(_default_grid(eps_grid), fn, dim_in, dim_out, **kwargs)

    @classmethod
    def mollified(
        cls, field: "MollifiedField", t: float = 0.0, eps_grid: Optional[Sequence[float]] = None
    ) -> "EpsFamily":
        """x -> A_eps(t, x) at a frozen time"""
        grid = field.mollifier.eps_grid() if eps_grid is None else eps_grid

        def value_fn(eps: float, X: np.ndarray) -> np.ndarray:
            return field(eps, t, X)

        name = f"mollified {field.coefficient!r} at t={t:g}"
        return cls(grid, value_fn, field.dim, field.dim, natural=True, name=name)

    @classmethod
    def from_trajectories(cls, trajectories: Dict[float, Trajectory]) -> "EpsFamily":
        """s -> xi_eps(s) for solved trajectories keyed by eps"""
        grid = sorted(trajectories, reverse=True)
        dim = trajectories[grid[0]].dim

        def value_fn(eps: float, S: np.ndarray) -> np.ndarray:
            return trajectories[eps].at(S[:, 0])

        return cls(grid, value_fn, 1, dim, natural=True, name="trajectories")

    # Operations

    def composed(self, inner: "EpsFamily") -> "EpsFamily":
        """(F o G)_eps = F_eps(G_eps(x)) on the common eps grid"""
        if inner.dim_out != self.dim_in:
            raise InvalidArgumentError(
                "range of the inner family does not match", inner=inner.dim_out, outer=self.dim_in
            )
        grid = np.intersect1d(self.eps_grid, inner.eps_grid)[::-1]
        if grid.size == 0:
            raise InvalidArgumentError("families share no eps value")

        def value_fn(eps: float, X: np.ndarray) -> np.ndarray:
            return self.value_at(eps, inner.value_at(eps, X))

        return EpsFamily(grid, value_fn, inner.dim_in, self.dim_out, name=f"({self.name}) o ({inner.name})")

    def restricted(self, eps_grid: Sequence[float]) -> "EpsFamily":
        return EpsFamily(eps_grid, self._value_fn, self.dim_in, self.dim_out, self.natural, self.cbound, self.name)

    def cbound_violations(self, samples: int = 64, seed: int = 0) -> List[Dict[str, Any]]:
        """Sampled points of a declared compact whose value leaves the declared image box"""
        rng = np.random.default_rng(seed)
        bad = []
        for compact, image in self.cbound.items():
            box = np.asarray(compact, dtype=float)
            target = np.asarray(image, dtype=float)
            X = rng.uniform(box[:, 0], box[:, 1], size=(samples, self.dim_in))
            for eps in self.eps_grid:
                values = self.value_at(eps, X)
                outside = np.any((values < target[:, 0]) | (values > target[:, 1]), axis=1)
                for m in np.flatnonzero(outside)[:1]:
                    bad.append({"eps": float(eps), "x": X[m].tolist(), "value": values[m].tolist()})
        return bad

    def __repr__(self) -> str:
        grid = self.eps_grid
        return f"EpsFamily({self.name}, eps in [{grid[-1]:.3g}, {grid[0]:.3g}], n={grid.size})"


def _default_grid(eps_grid: Optional[Sequence[float]]) -> np.ndarray:
    if eps_grid is not None:
        return np.asarray(eps_grid, dtype=float)
    first, last = numerics("ggraph")["eps_exponents"]
    return 2.0 ** -np.arange(int(first), int(last) + 1, dtype=float)


class MollifiedField:
    """
    A_eps(t, x) = int a(t, x - gamma_eps y) rho(y) dy

    On the line the quadrature panels split at the surface positions, so
    every panel integrates one smooth branch. In higher dimensions a tensor
    Gauss rule over the kernel support box is used.
    """

    def __init__(self, coefficient: Coefficient, mollifier: MollifierSpec, nodes: Optional[int] = None):
        self.coefficient = coefficient
        self.mollifier = mollifier
        self.dim = coefficient.dim
        self.kernel = KERNELS[mollifier.kind]
        self.support = SUPPORTS[mollifier.kind]
        self.scale = SCALE_LAWS[mollifier.scale]
        self.nodes = int(numerics("solvers")["mollifier_nodes"]) if nodes is None else int(nodes)
        if self.dim > 1:
            lo, hi = self.support
            y, w = panel_rule(np.unique([lo, np.clip(0.0, lo, hi), hi]), max(4, self.nodes // 2))
            mesh = np.meshgrid(*([y] * self.dim), indexing="ij")
            weights = np.prod(np.meshgrid(*([w * self.kernel(y)] * self.dim), indexing="ij"), axis=0)
            self._tensor_nodes = np.column_stack([m.ravel() for m in mesh])
            self._tensor_weights = weights.ravel()

    def __call__(self, eps: float, t: float, X: Any) -> np.ndarray:
        X = _as_rows(X, self.dim)
        gamma = self.scale(eps)
        if self.dim == 1:
            return self._line(gamma, float(t), X[:, 0])
        points = X[:, None, :] - gamma * self._tensor_nodes[None, :, :]
        values = self.coefficient(t, points.reshape(-1, self.dim)).reshape(X.shape[0], -1, self.dim)
        return np.einsum("k,mkd->md", self._tensor_weights, values)

    def _line(self, gamma: float, t: float, xs: np.ndarray) -> np.ndarray:
        lo, hi = self.support
        all_nodes, all_weights, starts = [], [], []
        count = 0
        for x in xs:
            if self.coefficient.has_x_surfaces:
                roots = self.coefficient.surface_positions(t, x - gamma * hi, x - gamma * lo)
            else:
                roots = []
            cuts = sorted((x - r) / gamma for r in roots)
            breaks = np.unique(np.clip(np.concatenate([[lo, hi], cuts]), lo, hi))
            y, w = panel_rule(breaks, self.nodes)
            starts.append(count)
            count += y.size
            all_nodes.append(x - gamma * y)
            all_weights.append(w * self.kernel(y))
        nodes = np.concatenate(all_nodes)
        weighted = np.concatenate(all_weights)[:, None] * self.coefficient(t, nodes[:, None])
        return np.add.reduceat(weighted, np.asarray(starts), axis=0)

    def family(self, t: float = 0.0) -> EpsFamily:
        return EpsFamily.mollified(self, t)


class GraphSlice(BaseModel):
    """Cluster values of an eps-family at a base point and their convex hull"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base_x: List[float]
    values: ConvexBody
    points: np.ndarray
    resolution: Tuple[float, float]
    meta: Dict[str, Any] = Field(default_factory=dict)

    @property
    def interval(self) -> Tuple[float, float]:
        """Scalar slices only: [min, max] of the hull"""
        if self.points.shape[1] != 1:
            raise InvalidArgumentError("interval view needs a scalar family")
        return float(self.points.min()), float(self.points.max())
