"""
Piecewise coefficients a(t, x) with discontinuity surfaces, and their essential convex hull
"""

import itertools
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.integrate import quad
from scipy.optimize import brentq

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError
from nsflow.core.expressions import T, CompiledExpression, parse_formula, state_symbols
from nsflow.core.logging import log
from nsflow.models.convex import ConvexBody, SetValuedPath
from nsflow.schemas.problem import CoefficientSpec, DomainSpec
from nsflow.utils.grids import direction_grid

COMPARISONS: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}

KINK_TYPES = (sp.Heaviside, sp.sign, sp.Abs, sp.Min, sp.Max)


def _kink_argument(node: sp.Expr) -> Optional[sp.Expr]:
    """Expression whose sign selects the branch of a kink primitive"""
    if isinstance(node, (sp.Heaviside, sp.sign, sp.Abs)):
        return node.args[0]
    if isinstance(node, (sp.Min, sp.Max)) and len(node.args) == 2:
        return node.args[0] - node.args[1]
    return None


def _orientation(arg: sp.Expr, surface: sp.Expr) -> int:
    """+1 / -1 when arg is a positive / negative multiple of surface, else 0"""
    if arg == surface:
        return 1
    if sp.expand(arg + surface) == 0:
        return -1
    ratio = sp.simplify(arg / surface)
    if ratio.is_number and ratio != 0 and ratio.is_real:
        return 1 if ratio > 0 else -1
    return 0


def _branch(expr: sp.Expr, surfaces: Sequence[sp.Expr], signs: Sequence[int]) -> sp.Expr:
    """Replace each kink primitive by its smooth branch on the given side of every surface"""

    def select(node: sp.Expr) -> sp.Expr:
        arg = _kink_argument(node)
        if arg is None:
            return node
        for surface, side in zip(surfaces, signs):
            orientation = _orientation(arg, surface)
            if orientation == 0:
                continue
            positive = side * orientation > 0
            if isinstance(node, sp.Heaviside):
                return sp.Integer(1) if positive else sp.Integer(0)
            if isinstance(node, sp.sign):
                return sp.Integer(1) if positive else sp.Integer(-1)
            if isinstance(node, sp.Abs):
                return arg if positive else -arg
            first, second = node.args
            if isinstance(node, sp.Min):
                return second if positive else first
            return first if positive else second
        return node

    return expr.replace(lambda node: isinstance(node, KINK_TYPES), select)


class Surface:
    """Hypersurface g(t, x) = 0 with optional one-sided limits and Borel value"""

    def __init__(
        self,
        expr: sp.Expr,
        dim: int,
        minus: Optional[List[sp.Expr]] = None,
        plus: Optional[List[sp.Expr]] = None,
        value: Optional[List[sp.Expr]] = None,
        declared: bool = True,
    ):
        xs = state_symbols(dim)
        variables = [T, *xs]
        self.expr = sp.sympify(expr)
        self.dim = dim
        self.declared = declared
        self.g = CompiledExpression(self.expr, variables)
        self.grad = [CompiledExpression(sp.diff(self.expr, x), variables) for x in xs]
        self.dt = CompiledExpression(sp.diff(self.expr, T), variables)
        self.time_only = not any(self.expr.has(x) for x in xs)
        self.minus_exprs, self.plus_exprs, self.value_exprs = minus, plus, value
        self.minus = None if minus is None else [CompiledExpression(e, variables) for e in minus]
        self.plus = None if plus is None else [CompiledExpression(e, variables) for e in plus]
        self.value = None if value is None else [CompiledExpression(e, variables) for e in value]
        self.affine = None
        if dim == 1 and not self.time_only:
            self.affine = self.g.linear_coefficients(xs[0])

    def gradient(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.array([float(d(t, *x)) for d in self.grad])

    def normal(self, t: float, x: np.ndarray) -> np.ndarray:
        grad = self.gradient(t, x)
        norm = np.linalg.norm(grad)
        if norm == 0.0:
            raise InvalidArgumentError("surface gradient vanishes", surface=str(self.expr), point=list(map(float, x)))
        return grad / norm

    def side_formula(self, side: int) -> Optional[List[CompiledExpression]]:
        return self.plus if side > 0 else self.minus

    def transformed(self, mapping: Dict[sp.Symbol, sp.Expr], negate_values: bool) -> "Surface":
        def move(exprs: Optional[List[sp.Expr]]) -> Optional[List[sp.Expr]]:
            if exprs is None:
                return None
            moved = [e.subs(mapping) for e in exprs]
            return [-e for e in moved] if negate_values else moved

        return Surface(
            self.expr.subs(mapping),
            self.dim,
            minus=move(self.minus_exprs),
            plus=move(self.plus_exprs),
            value=move(self.value_exprs),
            declared=self.declared,
        )

    def __repr__(self) -> str:
        return f"Surface({self.expr} = 0)"


class Piece:
    """Region given by closed-form inequalities, with a formula valid inside it"""

    def __init__(self, region: List[Tuple[sp.Expr, str]], formula: List[sp.Expr], dim: int):
        xs = state_symbols(dim)
        variables = [T, *xs]
        self.dim = dim
        self.region_exprs = [(sp.sympify(e), op) for e, op in region]
        self.formula_exprs = [sp.sympify(e) for e in formula]
        self.region = [(CompiledExpression(e, variables), op) for e, op in self.region_exprs]
        self.formula = [CompiledExpression(e, variables) for e in self.formula_exprs]
        div = sum((sp.diff(e, x) for e, x in zip(self.formula_exprs, xs)), sp.Integer(0))
        self.divergence = CompiledExpression(div.replace(sp.DiracDelta, lambda *args: sp.Integer(0)), variables)

    def contains(self, t: np.ndarray, X: np.ndarray) -> np.ndarray:
        mask = np.ones(X.shape[0], dtype=bool)
        for expr, op in self.region:
            mask &= COMPARISONS[op](expr(t, *X.T), 0.0)
        return mask

    def evaluate(self, t: np.ndarray, X: np.ndarray) -> np.ndarray:
        return np.column_stack([f(t, *X.T) for f in self.formula])

    def transformed(self, mapping: Dict[sp.Symbol, sp.Expr], negate: bool) -> "Piece":
        formula = [e.subs(mapping) for e in self.formula_exprs]
        return Piece(
            [(e.subs(mapping), op) for e, op in self.region_exprs],
            [-e for e in formula] if negate else formula,
            self.dim,
        )


class CellField:
    """Smooth extension of a coefficient from one cell (piece plus surface sides)"""

    def __init__(self, formula: List[CompiledExpression], piece: int, signs: Tuple[int, ...]):
        self.formula = formula
        self.piece = piece
        self.signs = signs

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.array([float(f(t, *x)) for f in self.formula])

    def many(self, t: np.ndarray, X: np.ndarray) -> np.ndarray:
        return np.column_stack([f(t, *X.T) for f in self.formula])


class Coefficient:
    """
    Right-hand side a(t, x) assembled from pieces and discontinuity surfaces

    Arguments of H, sign, abs, min and max, and the region boundaries, become
    implicit surfaces when not declared. Off the surfaces a is the piece
    formula. On an x-surface it is the declared Borel value, or else the mean
    of the one-sided limits.
    """

    def __init__(
        self,
        dim: int,
        pieces: List[Piece],
        surfaces: Optional[List[Surface]] = None,
        bound: Optional[sp.Expr] = None,
        domain: Optional[DomainSpec] = None,
        spec: Optional[CoefficientSpec] = None,
    ):
        self.dim = dim
        self.pieces = pieces
        self.bound_expr = None if bound is None else sp.sympify(bound)
        self.domain = domain or DomainSpec()
        self.x_box = np.array(self.domain.x or [(-2.0, 2.0)] * dim, dtype=float)
        self.t_range = tuple(float(v) for v in self.domain.t)
        self.spec = spec
        self.surfaces = list(surfaces or [])
        self._add_implicit_surfaces()
        self.x_surface_ids = [j for j, s in enumerate(self.surfaces) if not s.time_only]
        self.t_surface_ids = [j for j, s in enumerate(self.surfaces) if s.time_only]
        self._bound_fn = None if self.bound_expr is None else CompiledExpression(self.bound_expr, [T])
        self._sampled_bound: Optional[float] = None
        self._cells: Dict[Tuple[int, Tuple[int, ...]], CellField] = {}

    # Construction

    @classmethod
    def from_spec(cls, spec: CoefficientSpec) -> "Coefficient":
        dim = spec.dim

        def parse_list(texts: Optional[List[str]]) -> Optional[List[sp.Expr]]:
            return None if texts is None else [parse_formula(text, dim) for text in texts]

        pieces = [
            Piece([(parse_formula(c.expr, dim), c.op) for c in p.region], parse_list(p.formula), dim)
            for p in spec.pieces
        ]
        surfaces = [
            Surface(parse_formula(s.expr, dim), dim, parse_list(s.minus), parse_list(s.plus), parse_list(s.value))
            for s in spec.surfaces
        ]
        bound = None if spec.bound is None else parse_formula(spec.bound, dim)
        if bound is not None and bound.free_symbols - {T}:
            raise InvalidArgumentError("bound may depend on t only", bound=spec.bound)
        return cls(dim, pieces, surfaces, bound=bound, domain=spec.domain, spec=spec)

    @classmethod
    def from_formula(cls, formula, **kwargs) -> "Coefficient":
        """Single-piece coefficient from one formula (scalar) or a formula list"""
        formulas = [formula] if isinstance(formula, str) else list(formula)
        spec = CoefficientSpec(dim=len(formulas), pieces=[{"formula": formulas}], **kwargs)
        return cls.from_spec(spec)

    def _add_implicit_surfaces(self) -> None:
        candidates: List[sp.Expr] = []
        for piece in self.pieces:
            candidates.extend(e for e, _ in piece.region_exprs)
            for expr in piece.formula_exprs:
                for node in expr.atoms(*KINK_TYPES):
                    arg = _kink_argument(node)
                    if arg is not None:
                        candidates.append(arg)
        for arg in candidates:
            if not arg.free_symbols:
                continue
            if any(_orientation(arg, s.expr) != 0 for s in self.surfaces):
                continue
            self.surfaces.append(Surface(arg, self.dim, declared=False))
            log.debug(f"Implicit surface {arg} = 0")

    # Geometry

    @property
    def has_x_surfaces(self) -> bool:
        return bool(self.x_surface_ids)

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            X = X.reshape(1, -1) if X.size == self.dim and self.dim > 1 else X.reshape(-1, self.dim)
        if X.shape[1] != self.dim:
            raise InvalidArgumentError("point dimension mismatch", expected=self.dim, got=X.shape[1])
        return X

    @staticmethod
    def _times(t, count: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(t, dtype=float), (count,)).astype(float)

    def surface_values(self, t, X) -> np.ndarray:
        """(surfaces, points) array of g_j(t, x)"""
        X = self._points(X)
        tt = self._times(t, X.shape[0])
        if not self.surfaces:
            return np.zeros((0, X.shape[0]))
        return np.vstack([s.g(tt, *X.T) for s in self.surfaces])

    def on_surface(self, t, X, tol: Optional[float] = None) -> np.ndarray:
        tol = settings.surface_tol if tol is None else tol
        X = self._points(X)
        if not self.x_surface_ids:
            return np.zeros(X.shape[0], dtype=bool)
        values = self.surface_values(t, X)[self.x_surface_ids]
        return np.any(np.abs(values) <= tol, axis=0)

    def piece_index(self, t, X) -> np.ndarray:
        """Index of the first piece containing each point, -1 when none"""
        X = self._points(X)
        tt = self._times(t, X.shape[0])
        index = np.full(X.shape[0], -1)
        for i, piece in enumerate(self.pieces):
            free = index < 0
            if not free.any():
                break
            hit = np.zeros_like(free)
            hit[free] = piece.contains(tt[free], X[free])
            index[hit] = i
        missing = index < 0
        if missing.any() and self.t_surface_ids:
            # region boundaries in t: right-continuous choice
            shifted = tt[missing] + 1e-9 * np.maximum(1.0, np.abs(tt[missing]))
            retry = np.full(int(missing.sum()), -1)
            for i, piece in enumerate(self.pieces):
                free = retry < 0
                hit = np.zeros_like(free)
                hit[free] = piece.contains(shifted[free], X[missing][free])
                retry[hit] = i
            index[missing] = retry
        return index

    def sides(self, t: float, x: np.ndarray) -> Tuple[int, ...]:
        """Sign of every surface at (t, x), zero counted as +1"""
        values = self.surface_values(t, x[None, :])[:, 0]
        return tuple(1 if v >= 0 else -1 for v in values)

    # Evaluation

    def cell_field(self, piece: int, signs: Tuple[int, ...]) -> CellField:
        """Formula of a piece with every kink resolved to the given surface sides"""
        key = (piece, tuple(signs))
        if key not in self._cells:
            exprs = [_branch(e, [s.expr for s in self.surfaces], signs) for e in self.pieces[piece].formula_exprs]
            variables = [T, *state_symbols(self.dim)]
            self._cells[key] = CellField([CompiledExpression(e, variables) for e in exprs], piece, key[1])
        return self._cells[key]

    def field_at(self, t: float, x: np.ndarray) -> CellField:
        """Smooth field of the cell containing an off-surface point"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        index = int(self.piece_index(t, x[None, :])[0])
        if index < 0:
            raise InvalidArgumentError("point outside all regions", t=float(t), x=x.tolist())
        return self.cell_field(index, self.sides(t, x))

    def _probe_step(self, x: np.ndarray) -> float:
        return 100.0 * settings.surface_tol * max(1.0, float(np.linalg.norm(x)))

    def active_surfaces(self, t: float, x: np.ndarray, tol: Optional[float] = None) -> List[int]:
        tol = settings.surface_tol if tol is None else tol
        if not self.x_surface_ids:
            return []
        values = self.surface_values(t, x[None, :])[:, 0]
        return [j for j in self.x_surface_ids if abs(values[j]) <= tol]

    def side_field(self, t: float, x: np.ndarray, surface: int, side: int) -> CellField:
        """Field on one side of a single surface near (t, x), extended across it"""
        declared = self.surfaces[surface].side_formula(side)
        if declared is not None:
            return CellField(declared, -1, ())
        x = np.atleast_1d(np.asarray(x, dtype=float))
        probe = x + side * self._probe_step(x) * self.surfaces[surface].normal(t, x)
        index = int(self.piece_index(t, probe[None, :])[0])
        if index < 0:
            raise InvalidArgumentError("no region on this side of the surface", surface=surface, side=side)
        signs = list(self.sides(t, probe))
        signs[surface] = side
        return self.cell_field(index, tuple(signs))

    def limits(self, t: float, x) -> List[np.ndarray]:
        """
        One-sided limit values of a at (t, x)

        Returns [a(t, x)] off the x-surfaces; one value per side of a single
        active surface; one value per sign combination when several meet.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        active = self.active_surfaces(t, x)
        if not active:
            return [self._off_surface(t, x)]
        if len(active) == 1:
            j = active[0]
            return [self.side_field(t, x, j, side)(t, x) for side in (-1, 1)]

        step = self._probe_step(x)
        normals = [self.surfaces[j].normal(t, x) for j in active]
        values = []
        for combo in itertools.product((-1, 1), repeat=len(active)):
            probe = x + step * sum(s * n for s, n in zip(combo, normals))
            index = int(self.piece_index(t, probe[None, :])[0])
            if index < 0:
                continue
            signs = list(self.sides(t, probe))
            for j, s in zip(active, combo):
                signs[j] = s
            values.append(self.cell_field(index, tuple(signs))(t, x))
        if not values:
            raise InvalidArgumentError("point outside all regions", t=float(t), x=x.tolist())
        return values

    def _off_surface(self, t: float, x: np.ndarray) -> np.ndarray:
        index = int(self.piece_index(t, x[None, :])[0])
        if index < 0:
            raise InvalidArgumentError("point outside all regions", t=float(t), x=x.tolist())
        return self.pieces[index].evaluate(self._times(t, 1), x[None, :])[0]

    def declared_value(self, t: float, x) -> Optional[np.ndarray]:
        """Borel value on the single active surface, when declared"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        active = self.active_surfaces(t, x)
        if len(active) != 1 or self.surfaces[active[0]].value is None:
            return None
        return np.array([float(f(t, *x)) for f in self.surfaces[active[0]].value])

    def model_value(self, t: float, x) -> np.ndarray:
        """Mean of the one-sided limits"""
        return np.mean(np.vstack(self.limits(t, x)), axis=0)

    def surface_value(self, t: float, x) -> np.ndarray:
        value = self.declared_value(t, x)
        return self.model_value(t, x) if value is None else value

    def __call__(self, t, X) -> np.ndarray:
        """a(t, x) for each row of X, shape (points, dim)"""
        X = self._points(X)
        tt = self._times(t, X.shape[0])
        out = np.empty((X.shape[0], self.dim))
        on = self.on_surface(tt, X)
        index = self.piece_index(tt, X)
        if np.any(index[~on] < 0):
            bad = int(np.flatnonzero((index < 0) & ~on)[0])
            raise InvalidArgumentError("point outside all regions", t=float(tt[bad]), x=X[bad].tolist())
        for i in np.unique(index[~on]):
            mask = (index == i) & ~on
            out[mask] = self.pieces[i].evaluate(tt[mask], X[mask])
        for m in np.flatnonzero(on):
            out[m] = self.surface_value(float(tt[m]), X[m])
        return out

    def essential_support(self, t, X, W) -> np.ndarray:
        """
        H_a(t, x, w) for each point and direction, shape (points, directions)

        Off the x-surfaces this is <a(t, x), w>; on them the max over the
        one-sided limits.
        """
        X = self._points(X)
        W = np.atleast_2d(np.asarray(W, dtype=float))
        tt = self._times(t, X.shape[0])
        values = self(tt, X) @ W.T
        for m in np.flatnonzero(self.on_surface(tt, X)):
            limits = np.vstack(self.limits(float(tt[m]), X[m]))
            values[m] = np.max(limits @ W.T, axis=0)
        return values

    def divergence(self, t, X) -> np.ndarray:
        """Piecewise analytic div a (surface deltas dropped)"""
        X = self._points(X)
        tt = self._times(t, X.shape[0])
        index = self.piece_index(tt, X)
        out = np.full(X.shape[0], np.nan)
        for i in np.unique(index[index >= 0]):
            mask = index == i
            out[mask] = self.pieces[i].divergence(tt[mask], *X[mask].T)
        return out

    # Bounds and breakpoints

    def bound(self, t) -> np.ndarray:
        """Majorant beta(t): declared formula, else 1.05 times the sampled sup of |a|"""
        if self._bound_fn is not None:
            return np.abs(self._bound_fn(t))
        if self._sampled_bound is None:
            rng = np.random.default_rng(0)
            count = 4096
            tt = rng.uniform(*self.t_range, size=count)
            X = rng.uniform(self.x_box[:, 0], self.x_box[:, 1], size=(count, self.dim))
            keep = self.piece_index(tt, X) >= 0
            values = np.linalg.norm(self(tt[keep], X[keep]), axis=1)
            self._sampled_bound = 1.05 * float(np.max(values)) if values.size else 0.0
        return np.full(np.shape(t), self._sampled_bound) if np.ndim(t) else np.float64(self._sampled_bound)

    def bound_integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        if self._bound_fn is None:
            return float(self.bound(0.0)) * (b - a)
        points = self.time_breaks(a, b) or None
        value, _ = quad(lambda s: float(self.bound(s)), a, b, limit=settings.quad_limit, points=points)
        return float(value)

    def time_breaks(self, t0: float, t1: float, samples: int = 2001) -> List[float]:
        """Roots of the time-only surfaces inside (t0, t1)"""
        if t1 <= t0 or not self.t_surface_ids:
            return []
        zeros = np.zeros(self.dim)
        grid = np.linspace(t0, t1, samples)
        roots: List[float] = []
        for j in self.t_surface_ids:
            g = self.surfaces[j].g
            values = g(grid, *zeros)
            roots.extend(float(grid[i]) for i in np.flatnonzero(values == 0.0))
            for i in np.flatnonzero(values[:-1] * values[1:] < 0):
                roots.append(brentq(lambda s: float(g(s, *zeros)), grid[i], grid[i + 1], xtol=settings.event_tol))
        return sorted({r for r in roots if t0 < r < t1})

    def surface_positions(self, t: float, lo: float, hi: float, samples: int = 801) -> List[float]:
        """Positions of the x-surfaces on the line at time t inside (lo, hi)"""
        if self.dim != 1:
            raise InvalidArgumentError("surface positions are defined for scalar coefficients")
        roots: List[float] = []
        for j in self.x_surface_ids:
            surface = self.surfaces[j]
            if surface.affine is not None:
                slope, intercept = surface.affine
                m = float(slope(t, 0.0))
                if m != 0.0:
                    roots.append(-float(intercept(t, 0.0)) / m)
                continue
            grid = np.linspace(lo, hi, samples)
            values = surface.g(t, grid)
            roots.extend(float(grid[i]) for i in np.flatnonzero(values == 0.0))
            for i in np.flatnonzero(values[:-1] * values[1:] < 0):
                roots.append(brentq(lambda x: float(surface.g(t, x)), grid[i], grid[i + 1], xtol=1e-14))
        return sorted({r for r in roots if lo < r < hi})

    # Transformations

    def time_reversed(self) -> "Coefficient":
        """b(s, x) = -a(-s, x)"""
        mapping = {T: -T}
        pieces = [p.transformed(mapping, negate=True) for p in self.pieces]
        surfaces = [s.transformed(mapping, negate_values=True) for s in self.surfaces if s.declared]
        bound = None if self.bound_expr is None else self.bound_expr.subs(mapping)
        domain = DomainSpec(t=(-self.t_range[1], -self.t_range[0]), x=[tuple(r) for r in self.x_box])
        reversed_coeff = Coefficient(self.dim, pieces, surfaces, bound=bound, domain=domain)
        reversed_coeff._sampled_bound = self._sampled_bound
        return reversed_coeff

    def __repr__(self) -> str:
        formulas = "; ".join(str(p.formula_exprs) for p in self.pieces)
        return f"Coefficient(dim={self.dim}, pieces=[{formulas}], surfaces={self.surfaces})"


class EssentialHull:
    """Essential convex hull A_{t,x} of a coefficient through its support function"""

    def __init__(self, coefficient: Coefficient, grid: Optional[np.ndarray] = None):
        self.coefficient = coefficient
        self.grid = direction_grid(coefficient.dim) if grid is None else grid

    @property
    def dim(self) -> int:
        return self.coefficient.dim

    def support(self, t, X, W: Optional[np.ndarray] = None) -> np.ndarray:
        return self.coefficient.essential_support(t, X, self.grid if W is None else W)

    def body(self, t: float, x) -> ConvexBody:
        limits = np.vstack(self.coefficient.limits(t, x))
        kind = "point" if limits.shape[0] == 1 else "polytope"
        return ConvexBody.from_generators(limits, kind=kind, grid=self.grid)

    def along(
        self, path: Callable[[float], np.ndarray], t0: float, t1: float, breaks: Sequence[float] = ()
    ) -> SetValuedPath:
        """tau -> A_{tau, path(tau)} as a set-valued path"""
        coefficient = self.coefficient

        def support_fn(tau: float, W: np.ndarray) -> np.ndarray:
            return coefficient.essential_support(tau, np.atleast_1d(path(tau))[None, :], W)[0]

        return SetValuedPath(
            dim=self.dim,
            t0=t0,
            t1=t1,
            support_fn=support_fn,
            bound=lambda tau: float(coefficient.bound(tau)),
            grid=self.grid,
            breaks=tuple(sorted(set(breaks) | set(coefficient.time_breaks(t0, t1)))),
        )
