"""
Measures on the line, test-function banks and product kinds
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.core.numerics_config import numerics
from nsflow.schemas.problem import DensitySpec, MeasureStateSpec
from nsflow.utils.quadrature import panel_rule, split_breaks

Weight = Callable[[np.ndarray], np.ndarray]


class ProductKind(str, Enum):
    """Products of a discontinuous coefficient with a measure"""

    POUPAUD_RASCLE = "poupaud-rascle"
    BOUCHUT_JAMES = "bouchut-james"
    MODEL = "model"


def merge_atoms(atoms: Any, tol: float) -> np.ndarray:
    """Sort atoms by position, merge neighbours closer than tol and drop zero masses"""
    atoms = np.asarray(atoms, dtype=float).reshape(-1, 2)
    atoms = atoms[atoms[:, 1] != 0.0]
    if atoms.shape[0] == 0:
        return np.zeros((0, 2))
    atoms = atoms[np.argsort(atoms[:, 0], kind="stable")]
    groups = np.concatenate([[0], np.cumsum(np.diff(atoms[:, 0]) > tol)])
    merged = []
    for g in np.unique(groups):
        block = atoms[groups == g]
        weights = np.abs(block[:, 1])
        merged.append((float(np.average(block[:, 0], weights=weights)), float(block[:, 1].sum())))
    return np.array(merged)


class MeasureState(BaseModel):
    """
    u = sum m_k delta_{p_k} + rho dx on the line

    rho is piecewise polynomial: coeffs[j] are ascending powers of
    (x - breaks[j]) on [breaks[j], breaks[j+1]], zero outside the breaks.
    Products with a coefficient carry an extra smooth-per-piece weight that
    multiplies rho; weighted states pair normally but do not serialize.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    atoms: np.ndarray = Field(default_factory=lambda: np.zeros((0, 2)))
    breaks: np.ndarray = Field(default_factory=lambda: np.zeros(0))
    coeffs: List[np.ndarray] = Field(default_factory=list)
    weight: Optional[Weight] = Field(None, exclude=True)
    total_mass_window: Optional[float] = None

    @field_validator("atoms", mode="before")
    @classmethod
    def _coerce_atoms(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=float).reshape(-1, 2)

    @field_validator("breaks", mode="before")
    @classmethod
    def _coerce_breaks(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=float).reshape(-1)

    @field_validator("coeffs", mode="before")
    @classmethod
    def _coerce_coeffs(cls, value: Any) -> List[np.ndarray]:
        return [np.atleast_1d(np.asarray(c, dtype=float)) for c in value]

    @model_validator(mode="after")
    def _check_pieces(self) -> "MeasureState":
        if self.breaks.size == 0 and self.coeffs:
            raise ValueError("density coefficients need breaks")
        if self.breaks.size and len(self.coeffs) != self.breaks.size - 1:
            raise ValueError("density needs one coefficient row per interval")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("density breaks must be increasing")
        if not np.all(np.isfinite(self.atoms)):
            raise ValueError("atom positions and masses must be finite")
        return self

    # Constructors

    @classmethod
    def dirac(cls, position: float = 0.0, mass: float = 1.0) -> "MeasureState":
        return cls(atoms=[[position, mass]])

    @classmethod
    def lebesgue(cls, lo: float, hi: float, height: float = 1.0) -> "MeasureState":
        """Constant density on [lo, hi]"""
        if hi <= lo:
            raise InvalidArgumentError("empty density window", lo=lo, hi=hi)
        return cls(breaks=[lo, hi], coeffs=[[height]])

    @classmethod
    def from_spec(cls, spec: MeasureStateSpec) -> "MeasureState":
        return cls(atoms=spec.atoms or np.zeros((0, 2)), breaks=spec.density.breaks, coeffs=spec.density.coeffs)

    def to_spec(self) -> MeasureStateSpec:
        if self.weight is not None:
            raise InvalidArgumentError("weighted product states have no polynomial density form")
        density = DensitySpec(breaks=self.breaks.tolist(), coeffs=[c.tolist() for c in self.coeffs])
        return MeasureStateSpec(atoms=[(float(p), float(m)) for p, m in self.atoms], density=density)

    # Views

    @property
    def has_density(self) -> bool:
        return self.breaks.size > 1

    @property
    def window(self) -> Tuple[float, float]:
        """Smallest interval holding every atom and density piece"""
        points = np.concatenate([self.atoms[:, 0], self.breaks])
        if points.size == 0:
            return (0.0, 0.0)
        return (float(points.min()), float(points.max()))

    def pieces(self) -> Iterator[Tuple[float, float, np.ndarray]]:
        for j, c in enumerate(self.coeffs):
            yield float(self.breaks[j]), float(self.breaks[j + 1]), c

    def density_at(self, x: Any) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        if not self.has_density:
            return out
        index = np.searchsorted(self.breaks, x, side="right") - 1
        inside = (index >= 0) & (index < len(self.coeffs)) | (x == self.breaks[-1])
        index = np.clip(index, 0, len(self.coeffs) - 1)
        for j in np.unique(index[inside]):
            mask = inside & (index == j)
            out[mask] = np.polynomial.polynomial.polyval(x[mask] - self.breaks[j], self.coeffs[j])
        if self.weight is not None and np.any(inside):
            out[inside] *= self.weight(x[inside])
        return out

    # Quadrature

    def quadrature(self, cuts: Sequence[float] = (), width: Optional[float] = None, order: Optional[int] = None):
        """
        Nodes and weights with <u, phi> = sum weights * phi(nodes)

        Density panels split at the breaks and at any interior cuts; atoms
        come last with their masses as weights.
        """
        constants = numerics("transport")
        width = float(constants["pairing_width"]) if width is None else width
        order = int(constants["gauss_nodes"]) if order is None else order
        nodes, weights = [], []
        for lo, hi, _ in self.pieces():
            y, w = panel_rule(split_breaks(lo, hi, cuts, width), order)
            nodes.append(y)
            weights.append(w)
        if nodes:
            x = np.concatenate(nodes)
            w = np.concatenate(weights) * self.density_at(x)
        else:
            x, w = np.zeros(0), np.zeros(0)
        return np.concatenate([x, self.atoms[:, 0]]), np.concatenate([w, self.atoms[:, 1]])

    def pair(self, fn: Callable[[np.ndarray], np.ndarray], cuts: Sequence[float] = ()) -> float:
        """<u, fn> for a vectorized function of x"""
        nodes, weights = self.quadrature(cuts)
        if nodes.size == 0:
            return 0.0
        return float(np.sum(weights * fn(nodes)))

    def mass(self, lo: float = -np.inf, hi: float = np.inf) -> float:
        """u([lo, hi])"""
        inside = (self.atoms[:, 0] >= lo) & (self.atoms[:, 0] <= hi)
        return float(self.atoms[inside, 1].sum()) + self.density_mass(lo, hi)

    def density_mass(self, lo: float = -np.inf, hi: float = np.inf) -> float:
        total = 0.0
        for a, b, c in self.pieces():
            left, right = max(a, lo), min(b, hi)
            if right <= left:
                continue
            if self.weight is None:
                antiderivative = Polynomial(c).integ()
                total += float(antiderivative(right - a) - antiderivative(left - a))
            else:
                y, w = panel_rule(split_breaks(left, right, (), float(numerics("transport")["pairing_width"])), 8)
                total += float(np.sum(w * self.density_at(y)))
        return total

    @property
    def total_mass(self) -> float:
        return self.mass()

    # Transformations

    def refined(self, cuts: Sequence[float]) -> "MeasureState":
        """Same measure with extra density breaks at the interior cuts"""
        if not self.has_density:
            return self
        breaks, coeffs = [float(self.breaks[0])], []
        for lo, hi, c in self.pieces():
            inner = sorted(x for x in cuts if lo < x < hi)
            poly = Polynomial(c)
            for left in [lo, *inner]:
                coeffs.append(poly(Polynomial([left - lo, 1.0])).coef)
            breaks.extend([*inner, hi])
        return self.model_copy(update={"breaks": np.asarray(breaks), "coeffs": coeffs})

    def multiplied(self, factor: Weight, atom_values: Sequence[float], cuts: Sequence[float] = ()) -> "MeasureState":
        """
        Density times factor and atom masses times atom_values

        factor must be smooth on every piece once the cuts are added.
        """
        if len(atom_values) != self.atoms.shape[0]:
            raise InvalidArgumentError(
                "one value per atom required", atoms=self.atoms.shape[0], values=len(atom_values)
            )
        base = self.refined(cuts)
        previous = base.weight
        weight = factor if previous is None else (lambda x: previous(x) * factor(x))
        atoms = self.atoms.copy()
        atoms[:, 1] *= np.asarray(atom_values, dtype=float)
        return base.model_copy(update={"atoms": atoms, "weight": weight})

    def shifted(self, offset: float) -> "MeasureState":
        """Translate by offset"""
        atoms = self.atoms.copy()
        atoms[:, 0] += offset
        weight = self.weight
        shifted_weight = None if weight is None else (lambda x: weight(x - offset))
        return self.model_copy(update={"atoms": atoms, "breaks": self.breaks + offset, "weight": shifted_weight})

    def plus_atoms(self, atoms: Any, tol: Optional[float] = None) -> "MeasureState":
        tol = float(numerics("transport")["atom_merge_tol"]) if tol is None else tol
        combined = np.vstack([self.atoms, np.asarray(atoms, dtype=float).reshape(-1, 2)])
        return self.model_copy(update={"atoms": merge_atoms(combined, tol)})

    def atom_near(self, position: float, tol: float = 1e-6) -> float:
        """Total mass of the atoms within tol of position"""
        close = np.abs(self.atoms[:, 0] - position) <= tol
        return float(self.atoms[close, 1].sum())

    def __repr__(self) -> str:
        return f"MeasureState(atoms={self.atoms.tolist()}, pieces={len(self.coeffs)}, window={self.window})"


class MeasurePath:
    """t -> u(t), evaluated lazily"""

    def __init__(self, fn: Callable[[float], MeasureState], name: str = "path"):
        self._fn = fn
        self.name = name

    def at(self, t: float) -> MeasureState:
        return self._fn(float(t))

    @classmethod
    def constant(cls, state: MeasureState) -> "MeasurePath":
        return cls(lambda t: state, name="constant")


def _bump(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


def _bump_prime(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = -2.0 * zi / (1.0 - zi**2) ** 2 * np.exp(-1.0 / (1.0 - zi**2))
    return out


@dataclass(frozen=True)
class TestFunction:
    """phi(t, x) = B(zt) B(zx) zx^power with zt = (t - tc)/rt, zx = (x - xc)/rx"""

    __test__ = False

    t_center: float
    t_radius: float
    x_center: float
    x_radius: float
    power: int = 0

    def _z(self, t, x) -> Tuple[np.ndarray, np.ndarray]:
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        return (t - self.t_center) / self.t_radius, (x - self.x_center) / self.x_radius

    def __call__(self, t, x) -> np.ndarray:
        zt, zx = self._z(t, x)
        return _bump(zt) * _bump(zx) * zx**self.power

    def dt(self, t, x) -> np.ndarray:
        zt, zx = self._z(t, x)
        return _bump_prime(zt) / self.t_radius * _bump(zx) * zx**self.power

    def dx(self, t, x) -> np.ndarray:
        zt, zx = self._z(t, x)
        polynomial_part = self.power * zx ** max(self.power - 1, 0) if self.power else 0.0
        return _bump(zt) * (_bump_prime(zx) * zx**self.power + _bump(zx) * polynomial_part) / self.x_radius

    @property
    def support(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        return (
            (self.t_center - self.t_radius, self.t_center + self.t_radius),
            (self.x_center - self.x_radius, self.x_center + self.x_radius),
        )


class TestFunctionBank:
    """Finite family of smooth compactly supported test functions on (t, x)"""

    __test__ = False

    def __init__(self, members: Sequence[TestFunction]):
        if not members:
            raise InvalidArgumentError("test function bank is empty")
        self.members = list(members)

    @classmethod
    def default(
        cls,
        t_window: Tuple[float, float] = (0.0, 1.0),
        x_window: Tuple[float, float] = (-1.5, 1.5),
        size: Optional[int] = None,
    ) -> "TestFunctionBank":
        """Bumps and polynomial-times-bumps spread over the window, supports strictly inside it"""
        size = int(numerics("transport")["bank_size"]) if size is None else size
        t0, t1 = t_window
        x0, x1 = x_window
        span_t, span_x = t1 - t0, x1 - x0
        rx = 0.3 * span_x
        centers = np.linspace(x0 + rx, x1 - rx, size) if size > 1 else np.array([0.5 * (x0 + x1)])
        members = []
        for i, xc in enumerate(centers):
            shift = (i % 3) - 1
            members.append(
                TestFunction(
                    t_center=t0 + span_t * (0.5 + 0.1 * shift),
                    t_radius=0.35 * span_t,
                    x_center=float(xc),
                    x_radius=rx * (1.0 - 0.1 * (i % 2)),
                    power=i % 3,
                )
            )
        return cls(members)

    def __iter__(self) -> Iterator[TestFunction]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, index: int) -> TestFunction:
        return self.members[index]

    @property
    def t_window(self) -> Tuple[float, float]:
        return (min(m.support[0][0] for m in self), max(m.support[0][1] for m in self))

    @property
    def x_window(self) -> Tuple[float, float]:
        return (min(m.support[1][0] for m in self), max(m.support[1][1] for m in self))

    def support_violations(self, samples: int = 4000, seed: int = 0) -> List[int]:
        """Members with a nonzero sampled value outside their declared support"""
        rng = np.random.default_rng(seed)
        (t_lo, t_hi), (x_lo, x_hi) = self.t_window, self.x_window
        pad_t, pad_x = t_hi - t_lo, x_hi - x_lo
        t = rng.uniform(t_lo - pad_t, t_hi + pad_t, samples)
        x = rng.uniform(x_lo - pad_x, x_hi + pad_x, samples)
        bad = []
        for k, member in enumerate(self):
            (a, b), (c, d) = member.support
            outside = (t <= a) | (t >= b) | (x <= c) | (x >= d)
            if np.any(member(t[outside], x[outside]) != 0.0):
                bad.append(k)
        return bad
