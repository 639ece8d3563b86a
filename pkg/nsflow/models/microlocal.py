"""
Oscillatory-integral problems: amplitude, phase and declared gradient bound
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Chebyshev

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.core.expressions import EPS, CompiledExpression, parse_formula, state_symbols
from nsflow.models.family import EpsFamily

SUP_SAMPLES = 4097
CHEBYSHEV_DEGREE = 48

GradBound = Callable[[float], float]


def _formula_family(expr: CompiledExpression, eps_grid: Optional[Sequence[float]], name: str) -> EpsFamily:
    def value_fn(eps: float, X: np.ndarray) -> np.ndarray:
        return expr(eps, X[:, 0])[:, None]

    return EpsFamily.from_function(value_fn, eps_grid=eps_grid, name=name)


class PhaseProblem:
    """
    I_eps(omega) = int_K u_eps(x) exp(i omega phi_eps(x)) dx on an interval K

    Derivative families, when given, list D^1, D^2, ... of the amplitude and
    the phase. Without them sup-norms of derivatives come from a Chebyshev
    interpolant on K.
    """

    def __init__(
        self,
        amplitude: EpsFamily,
        phase: EpsFamily,
        support: Tuple[float, float],
        grad_bound: Optional[GradBound] = None,
        amplitude_derivatives: Optional[Sequence[EpsFamily]] = None,
        phase_derivatives: Optional[Sequence[EpsFamily]] = None,
        name: str = "",
    ):
        lo, hi = float(support[0]), float(support[1])
        if not hi > lo:
            raise InvalidArgumentError("support must be a non-degenerate interval", support=[lo, hi])
        if amplitude.dim_in != 1 or phase.dim_in != 1:
            raise InvalidArgumentError("phase problems are one-dimensional")
        self.amplitude = amplitude
        self.phase = phase
        self.support = (lo, hi)
        self.grad_bound = grad_bound
        self.amplitude_derivatives: List[EpsFamily] = list(amplitude_derivatives or [])
        self.phase_derivatives: List[EpsFamily] = list(phase_derivatives or [])
        self.name = name or f"{amplitude.name} / {phase.name}"

    @classmethod
    def from_formulas(
        cls,
        amplitude: str,
        phase: str,
        support: Tuple[float, float],
        grad_bound: Optional[str] = None,
        eps_grid: Optional[Sequence[float]] = None,
        orders: int = 8,
    ) -> "PhaseProblem":
        """
        Problem from formulas over x and eps, derivatives taken symbolically

        Args:
            amplitude: u_eps, cut to the support K
            phase: Real phase phi_eps
            support: K = (lo, hi)
            grad_bound: Declared lambda_eps; defaults to the sampled inf_K |phi_eps'|
            eps_grid: Decreasing eps grid
            orders: Highest derivative order compiled
        """
        variables = [EPS, *state_symbols(1)]
        x = variables[1]
        u_expr = parse_formula(amplitude, 1, with_time=False, with_eps=True)
        phi_expr = parse_formula(phase, 1, with_time=False, with_eps=True)
        u = CompiledExpression(u_expr, variables)
        phi = CompiledExpression(phi_expr, variables)
        u_derivs = [_formula_family(u.diff(x, k), eps_grid, f"D^{k} u") for k in range(1, orders + 1)]
        phi_derivs = [_formula_family(phi.diff(x, k), eps_grid, f"D^{k} phi") for k in range(1, orders + 1)]

        bound: Optional[GradBound] = None
        if grad_bound is not None:
            lam = CompiledExpression(parse_formula(grad_bound, 1, with_time=False, with_eps=True), variables)

            def bound(eps: float) -> float:
                return float(lam(eps, 0.0))

        return cls(
            _formula_family(u, eps_grid, amplitude),
            _formula_family(phi, eps_grid, phase),
            support,
            bound,
            u_derivs,
            phi_derivs,
            name=f"{amplitude} / {phase}",
        )

    @property
    def eps_grid(self) -> np.ndarray:
        return np.intersect1d(self.amplitude.eps_grid, self.phase.eps_grid)[::-1]

    @property
    def length(self) -> float:
        return self.support[1] - self.support[0]

    def sample_points(self, count: int = SUP_SAMPLES) -> np.ndarray:
        return np.linspace(self.support[0], self.support[1], count)

    def amplitude_at(self, eps: float, x: np.ndarray) -> np.ndarray:
        """u_eps, zero outside K"""
        x = np.asarray(x, dtype=float)
        inside = (x >= self.support[0]) & (x <= self.support[1])
        with np.errstate(all="ignore"):
            values = self.amplitude.value_at(eps, x[:, None])[:, 0]
        return np.where(inside, np.nan_to_num(values), 0.0)

    def phase_at(self, eps: float, x: np.ndarray) -> np.ndarray:
        return self.phase.value_at(eps, np.asarray(x, dtype=float)[:, None])[:, 0]

    def _derivatives(self, family: EpsFamily, listed: List[EpsFamily], eps: float, order: int) -> List[np.ndarray]:
        x = self.sample_points()
        values = [np.nan_to_num(family.value_at(eps, x[:, None])[:, 0])]
        if order == 0:
            return values
        if len(listed) >= order:
            return values + [np.nan_to_num(d.value_at(eps, x[:, None])[:, 0]) for d in listed[:order]]
        interpolant = Chebyshev.fit(x, values[0], CHEBYSHEV_DEGREE, domain=list(self.support))
        return values + [interpolant.deriv(k)(x) for k in range(1, order + 1)]

    def amplitude_sups(self, eps: float, order: int) -> np.ndarray:
        """sup_K |D^j u_eps| for j = 0..order"""
        derivatives = self._derivatives(self.amplitude, self.amplitude_derivatives, eps, order)
        return np.array([np.max(np.abs(v)) for v in derivatives])

    def phase_sups(self, eps: float, order: int) -> np.ndarray:
        """sup_K |D^j phi_eps| for j = 0..order"""
        return np.array([np.max(np.abs(v)) for v in self._derivatives(self.phase, self.phase_derivatives, eps, order)])

    def gradient(self, eps: float) -> np.ndarray:
        return self._derivatives(self.phase, self.phase_derivatives, eps, 1)[1]

    def gradient_inf(self, eps: float) -> float:
        """Sampled inf_K |phi_eps'|, zero when phi_eps' changes sign"""
        grad = self.gradient(eps)
        if np.any(grad[:-1] * grad[1:] <= 0):
            return 0.0
        return float(np.min(np.abs(grad)))

    def lambda_at(self, eps: float) -> float:
        """Declared lambda_eps, or the sampled infimum when none was declared"""
        if self.grad_bound is None:
            return self.gradient_inf(eps)
        return float(self.grad_bound(eps))

    def grad_bound_violations(self) -> List[float]:
        """Grid eps values with sampled inf_K |phi_eps'| below lambda_eps or lambda_eps <= 0"""
        bad = []
        for eps in self.eps_grid:
            lam = self.lambda_at(eps)
            if lam <= 0 or self.gradient_inf(eps) < lam * (1.0 - 1e-9):
                bad.append(float(eps))
        return bad

    def rescaled(self, sigma: float) -> "PhaseProblem":
        """Phase phi / sigma, lambda / sigma"""
        if sigma <= 0:
            raise InvalidArgumentError("sigma must be positive", sigma=sigma)
        scale = 1.0 / float(sigma)
        bound = None if self.grad_bound is None else (lambda eps, b=self.grad_bound: scale * b(eps))
        return PhaseProblem(
            self.amplitude,
            _scaled(self.phase, scale, 0.0),
            self.support,
            bound,
            self.amplitude_derivatives,
            [_scaled(d, scale, 0.0) for d in self.phase_derivatives],
            name=f"{self.name} (phase / {sigma:g})",
        )

    def shifted(self, constant: float) -> "PhaseProblem":
        """Phase phi + constant"""
        return PhaseProblem(
            self.amplitude,
            _scaled(self.phase, 1.0, constant),
            self.support,
            self.grad_bound,
            self.amplitude_derivatives,
            self.phase_derivatives,
            name=f"{self.name} (phase + {constant:g})",
        )

    def __repr__(self) -> str:
        return f"PhaseProblem({self.name}, K=[{self.support[0]:g}, {self.support[1]:g}])"


def _scaled(family: EpsFamily, scale: float, shift: float) -> EpsFamily:
    def value_fn(eps: float, X: np.ndarray) -> np.ndarray:
        return scale * family.value_at(eps, X) + shift

    return EpsFamily(family.eps_grid, value_fn, family.dim_in, family.dim_out, name=family.name)
