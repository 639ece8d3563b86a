"""
Microlocal service
Oscillatory integrals with stationary-phase decay checks, windowed Fourier
wavefront estimates for eps-families and pullback containment checks
"""

from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError, RefusedError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.family import EpsFamily, MollifiedField
from nsflow.models.microlocal import PhaseProblem
from nsflow.schemas.reports import ContainmentReport, DecayReport, RescalingReport, WavefrontEstimate, WavefrontPoint
from nsflow.services.flow_service import is_autonomous
from nsflow.utils.grids import direction_grid
from nsflow.utils.quadrature import loglog_slope, panel_rule

PANEL_ORDER = 16
MIN_NODES = 256
CONVERGENCE_TOL = 1e-13

DirectionBound = Union[WavefrontEstimate, Callable[[Sequence[float]], Sequence[int]]]


def _envelope(values: np.ndarray) -> np.ndarray:
    """Running maximum from the right; removes the zeros of oscillating transforms"""
    return np.maximum.accumulate(np.asarray(values)[::-1])[::-1]


class OscillatoryIntegrator:
    """Gauss panels with at least nodes_per_period nodes per oscillation, doubled until converged"""

    def __init__(self, problem: PhaseProblem):
        self.problem = problem
        config = numerics("microlocal")
        self.nodes_per_period = int(config["nodes_per_period"])
        self.max_nodes = int(config["max_nodes"])

    @lru_cache(maxsize=64)
    def _grad_sup(self, eps: float) -> float:
        return float(np.max(np.abs(self.problem.gradient(eps))))

    @lru_cache(maxsize=32)
    def _samples(self, eps: float, count: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.problem.support
        panels = max(1, int(np.ceil(count / PANEL_ORDER)))
        x, w = panel_rule(np.linspace(lo, hi, panels + 1), PANEL_ORDER)
        return w * self.problem.amplitude_at(eps, x), self.problem.phase_at(eps, x)

    def max_omega(self, eps: float) -> float:
        """Largest omega whose oscillations fit in max_nodes at nodes_per_period"""
        grad = self._grad_sup(eps)
        if grad == 0.0:
            return float("inf")
        return self.max_nodes * 2.0 * np.pi / (self.nodes_per_period * grad * self.problem.length)

    def _start_nodes(self, eps: float, omega: float) -> int:
        periods = omega * self._grad_sup(eps) * self.problem.length / (2.0 * np.pi)
        return int(max(MIN_NODES, 2 ** int(np.ceil(np.log2(max(1.0, self.nodes_per_period * periods))))))

    def __call__(self, eps: float, omega: float) -> complex:
        """
        I_eps(omega) = int_K u_eps exp(i omega phi_eps)

        Raises:
            InvalidArgumentError: omega is not positive
            RefusedError: the oscillations at omega cannot be resolved within max_nodes
        """
        if not omega > 0:
            raise InvalidArgumentError("omega must be positive", omega=omega)
        count = self._start_nodes(eps, omega)
        if count > self.max_nodes:
            raise RefusedError(
                "oscillations under-resolved at the requested omega", omega=omega, max_omega=self.max_omega(eps)
            )
        previous: Optional[complex] = None
        while True:
            weighted, phase = self._samples(float(eps), count)
            value = complex(np.sum(weighted * np.exp(1j * omega * phase)))
            scale = float(np.sum(np.abs(weighted))) or 1.0
            if previous is not None and abs(value - previous) <= CONVERGENCE_TOL * scale:
                return value
            if 2 * count > self.max_nodes:
                if previous is not None and abs(value - previous) <= 1e-9 * scale:
                    log.warning(f"Oscillatory integral at omega={omega:g} stopped at {count} nodes")
                    return value
                raise RefusedError(
                    "oscillatory quadrature did not converge within max_nodes",
                    omega=omega,
                    max_omega=self.max_omega(eps),
                )
            previous = value
            count *= 2
            log.debug(f"omega={omega:g}: refining to {count} nodes")

    def many(self, eps: float, omegas: Sequence[float]) -> np.ndarray:
        return np.array([self(eps, w) for w in omegas])

    def noise_floor(self, eps: float) -> float:
        weighted, _ = self._samples(float(eps), MIN_NODES)
        return 64.0 * np.finfo(float).eps * float(np.sum(np.abs(weighted)))


def oscillatory_integral(p: PhaseProblem, eps: float, omega: float) -> complex:
    return OscillatoryIntegrator(p)(eps, omega)


def _omega_grid(integrator: OscillatoryIntegrator, eps: float, omegas: Optional[Sequence[float]]) -> np.ndarray:
    if omegas is not None:
        return np.asarray(omegas, dtype=float)
    config = numerics("microlocal")
    lo, hi = (float(v) for v in config["omega_range"])
    hi = min(hi, integrator.max_omega(eps))
    return np.geomspace(lo, hi, int(config["omega_count"]))


def decay_constants(p: PhaseProblem, eps: float, k_max: int) -> Dict[int, float]:
    """
    L_k lambda^-k sum_{j<=k} sup_K |D^j u| for k = 0..k_max

    L_k = C_k max(1, mu_k^(2k^2)) with mu_k the largest sup of phase derivatives
    of orders 1..k+1 and C_k = |K|, the integration-by-parts constant for
    linear phases.
    """
    lam = np.float64(p.lambda_at(eps))
    amplitude = np.cumsum(p.amplitude_sups(eps, k_max))
    phase = p.phase_sups(eps, k_max + 1)
    constants = {}
    for k in range(k_max + 1):
        mu = np.max(phase[1 : k + 2])
        with np.errstate(over="ignore", divide="ignore"):
            L = p.length * max(1.0, mu ** (2 * k * k))
            constants[k] = float(L * lam ** (-k) * amplitude[k]) if lam > 0 else float("inf")
    return constants


def verify_decay(
    p: PhaseProblem, k_max: int = 6, eps: Optional[float] = None, omegas: Optional[Sequence[float]] = None
) -> DecayReport:
    """
    omega^k |I_eps(omega)| <= L_k lambda^-k sum sup |D^j u| for k = 0..k_max

    The verdict is "refused" for every k when the sampled inf_K |phi'| falls
    below the declared lambda; the empirical decay slope is reported either way.
    """
    eps = float(p.eps_grid[-1] if eps is None else eps)
    integrator = OscillatoryIntegrator(p)
    grid = _omega_grid(integrator, eps, omegas)
    values = np.abs(integrator.many(eps, grid))
    lam = p.lambda_at(eps)
    refused = lam <= 0 or p.gradient_inf(eps) < lam * (1.0 - 1e-9)
    if refused:
        log.warning(f"{p!r}: grad bound fails at eps={eps:g}, decay verdicts refused")

    floor = integrator.noise_floor(eps)
    upper = grid >= np.sqrt(grid[0] * grid[-1])
    envelope = _envelope(values)
    keep = upper & (envelope > floor)
    slope = loglog_slope(grid[keep], envelope[keep]) if keep.sum() >= 2 else float("-inf")

    onset = 1.0
    constants = decay_constants(p, eps, k_max)
    bounds: Dict[int, List[float]] = {}
    verdicts: Dict[int, str] = {}
    for k in range(k_max + 1):
        curve = constants[k] * grid ** (-float(k))
        bounds[k] = curve.tolist()
        if refused:
            verdicts[k] = "refused"
            continue
        mask = grid >= onset
        verdicts[k] = "pass" if bool(np.all(values[mask] <= curve[mask] * (1.0 + 1e-9) + floor)) else "fail"
    log.info(f"Decay check {p!r} at eps={eps:g}: slope {slope:.2f}, verdicts {verdicts}")
    return DecayReport(
        eps=eps,
        omegas=grid.tolist(),
        values=values.tolist(),
        grad_bound=lam,
        bounds=bounds,
        verdicts=verdicts,
        empirical_slope=slope,
        constants=constants,
        onset=onset,
    )


def verify_rescaling(
    p: PhaseProblem,
    sigmas: Sequence[float] = (1.0, 2.0, 4.0),
    k_max: int = 4,
    eps: Optional[float] = None,
    omegas: Optional[Sequence[float]] = None,
) -> RescalingReport:
    """
    I at phase phi / sigma and omega equals I at phase phi and omega / sigma

    Also fits how M_k(sigma) = max_omega omega^k |I_sigma(omega)| grows with
    sigma = 1 / lambda; the slope should be k.
    """
    eps = float(p.eps_grid[-1] if eps is None else eps)
    grid = np.geomspace(1.0, 400.0, 801) if omegas is None else np.asarray(omegas, dtype=float)
    base = OscillatoryIntegrator(p)
    errors = []
    peaks = {k: [] for k in range(1, k_max + 1)}
    for sigma in sigmas:
        scaled = OscillatoryIntegrator(p.rescaled(sigma)).many(eps, grid)
        direct = base.many(eps, grid / sigma)
        errors.append(float(np.max(np.abs(scaled - direct)) / max(np.max(np.abs(direct)), 1e-300)))
        for k in peaks:
            peaks[k].append(float(np.max(grid**k * np.abs(scaled))))
    slopes = {k: loglog_slope(np.asarray(sigmas, dtype=float), np.asarray(v)) for k, v in peaks.items()}
    return RescalingReport(
        sigmas=[float(s) for s in sigmas], omegas=grid.tolist(), relative_errors=errors, ratio_slopes=slopes
    )


# Wavefront estimates


def default_bases(dim: int) -> np.ndarray:
    axis = np.array([-0.5, 0.0, 0.5])
    if dim == 1:
        return axis[:, None]
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _antipodes(directions: np.ndarray) -> np.ndarray:
    gaps = np.linalg.norm(directions[:, None, :] + directions[None, :, :], axis=2)
    return np.argmin(gaps, axis=1)


class WavefrontEstimator:
    """
    Decay of |F(chi u_eps)(lambda xi)| along a fixed direction grid

    chi is a Gaussian window of width r or r/2 centered at the base point and
    sampled on grid_points nodes per axis over eight widths. A direction is
    irregular when the fitted slope is above the threshold for both widths and
    each of the finest eps values.
    """

    def __init__(
        self,
        family: EpsFamily,
        directions: Optional[np.ndarray] = None,
        threshold: Optional[float] = None,
        radius: Optional[float] = None,
        lambdas: Optional[Sequence[float]] = None,
        grid_points: int = 128,
        eps: Optional[Sequence[float]] = None,
    ):
        if family.dim_in not in (1, 2) or family.dim_out != 1:
            raise InvalidArgumentError("wavefront estimates need a scalar family on the line or the plane")
        config = numerics("microlocal")
        self.family = family
        self.dim = family.dim_in
        count = int(config["direction_count"])
        self.directions = direction_grid(self.dim, count) if directions is None else np.asarray(directions, dtype=float)
        self.threshold = float(config["decay_threshold"] if threshold is None else threshold)
        r = float(config["window_radius"] if radius is None else radius)
        self.widths = (r, 0.5 * r)
        lo, hi = (float(v) for v in config["lambda_range"])
        if lambdas is None:
            self.lambdas = np.geomspace(lo, hi, int(config["lambda_count"]))
        else:
            self.lambdas = np.asarray(lambdas, dtype=float)
        self.grid_points = int(grid_points)
        self.floor = float(config["amplitude_floor"])
        stable = int(config["stable_eps"])
        self.eps = np.asarray(family.eps_grid[-stable:] if eps is None else eps, dtype=float)

        antipodes = _antipodes(self.directions)
        self._representatives = np.array([i for i in range(len(self.directions)) if i <= antipodes[i]])
        self._antipodes = antipodes

    def _axes(self, base: np.ndarray, width: float) -> List[np.ndarray]:
        return [np.linspace(c - 8.0 * width, c + 8.0 * width, self.grid_points) for c in base]

    def transform(self, eps: float, base: np.ndarray, width: float, directions: np.ndarray) -> np.ndarray:
        """|F(chi u_eps)(lambda xi)| with shape (directions, lambdas)"""
        axes = self._axes(base, width)
        steps = [float(a[1] - a[0]) for a in axes]
        if self.dim == 1:
            x = axes[0]
            g = np.exp(-0.5 * ((x - base[0]) / width) ** 2) * self.family.value_at(eps, x[:, None])[:, 0]
            k = directions[:, 0][:, None] * self.lambdas[None, :]
            F = np.exp(-1j * k[..., None] * x[None, None, :]) @ g
            return np.abs(F) * steps[0]

        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        points = np.column_stack([X.ravel(), Y.ravel()])
        window = np.exp(-0.5 * np.sum((points - base) ** 2, axis=1) / width**2)
        G = (window * self.family.value_at(eps, points)[:, 0]).reshape(X.shape)
        kx = (directions[:, 0][:, None] * self.lambdas[None, :]).ravel()
        ky = (directions[:, 1][:, None] * self.lambdas[None, :]).ravel()
        Ex = np.exp(-1j * kx[:, None] * axes[0][None, :])
        Ey = np.exp(-1j * ky[:, None] * axes[1][None, :])
        F = np.sum((Ex @ G) * Ey, axis=1) * steps[0] * steps[1]
        return np.abs(F).reshape(directions.shape[0], self.lambdas.size)

    def slopes(self, magnitudes: np.ndarray) -> np.ndarray:
        """Log-log decay slope per direction over the upper half of the lambda grid; -inf below the floor"""
        upper = self.lambdas >= np.sqrt(self.lambdas[0] * self.lambdas[-1])
        out = np.full(magnitudes.shape[0], float("-inf"))
        for i, row in enumerate(magnitudes):
            envelope = _envelope(row)
            keep = upper & (envelope >= self.floor)
            if keep.sum() >= 3:
                out[i] = loglog_slope(self.lambdas[keep], envelope[keep])
        return out

    def point(self, base: Sequence[float]) -> WavefrontPoint:
        base = np.asarray(base, dtype=float)
        reps = self._representatives
        irregular = np.ones(reps.size, dtype=bool)
        reported = None
        for width in self.widths:
            for eps in self.eps:
                s = self.slopes(self.transform(float(eps), base, width, self.directions[reps]))
                irregular &= s > self.threshold
                if reported is None:
                    reported = s
        indices, slopes = [], []
        for j, i in enumerate(reps):
            if irregular[j]:
                for index in sorted({int(i), int(self._antipodes[i])}):
                    indices.append(index)
                    slopes.append(float(reported[j]))
        order = np.argsort(indices)
        log.debug(f"base {base.tolist()}: {len(indices)} irregular directions")
        return WavefrontPoint(
            base=base.tolist(), irregular=[indices[i] for i in order], slopes=[slopes[i] for i in order]
        )

    def estimate(self, bases: Optional[np.ndarray] = None) -> WavefrontEstimate:
        bases = default_bases(self.dim) if bases is None else np.atleast_2d(np.asarray(bases, dtype=float))
        log.info(
            f"Wavefront estimate for {self.family.name}: {len(bases)} base points, {len(self.directions)} directions"
        )
        with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
            points = list(pool.map(self.point, bases))
        return WavefrontEstimate(
            directions=self.directions.tolist(), points=points, threshold=self.threshold, eps=self.eps.tolist()
        )


def wavefront_estimate(
    u: EpsFamily,
    bases: Optional[np.ndarray] = None,
    directions: Optional[np.ndarray] = None,
    decay_threshold: Optional[float] = None,
    radius: Optional[float] = None,
    grid_points: int = 128,
) -> WavefrontEstimate:
    estimator = WavefrontEstimator(u, directions, decay_threshold, radius=radius, grid_points=grid_points)
    return estimator.estimate(bases)


def point_bound(points: Sequence[Sequence[float]], tol: float = 1e-9) -> Callable[[Sequence[float]], Sequence[int]]:
    """Bound allowing every direction over the listed base points and none elsewhere"""
    marked = np.atleast_2d(np.asarray(points, dtype=float))

    def allowed(base: Sequence[float], count: int = 0) -> Sequence[int]:
        close = np.any(np.max(np.abs(marked - np.asarray(base, dtype=float)), axis=1) <= tol)
        return range(count) if close else ()

    return allowed


def containment(estimate: WavefrontEstimate, expected: DirectionBound) -> ContainmentReport:
    """Irregular directions of estimate outside the bound, per base point"""
    if isinstance(expected, WavefrontEstimate) and len(expected.directions) != len(estimate.directions):
        raise InvalidArgumentError("estimate and bound use different direction grids")
    count = len(estimate.directions)
    violations = []
    for point in estimate.points:
        if isinstance(expected, WavefrontEstimate):
            allowed = set(expected.irregular_at(point.base))
        else:
            try:
                allowed = set(expected(point.base, count))
            except TypeError:
                allowed = set(expected(point.base))
        extra = [i for i in point.irregular if i not in allowed]
        if extra:
            violations.append({"base": point.base, "directions": extra})
    return ContainmentReport(contained=not violations, violations=violations, estimate=estimate)


def _product(family: EpsFamily, factor: EpsFamily) -> EpsFamily:
    def value_fn(eps: float, X: np.ndarray) -> np.ndarray:
        return family.value_at(eps, X) * factor.value_at(eps, X)

    return EpsFamily(family.eps_grid, value_fn, family.dim_in, 1, name=f"{family.name} * {factor.name}")


def pullback_wf_check(
    f: EpsFamily,
    u: EpsFamily,
    expected: DirectionBound,
    factor: Optional[EpsFamily] = None,
    bases: Optional[np.ndarray] = None,
    **estimator_options,
) -> ContainmentReport:
    """
    Wavefront estimate of (u o f) [* factor] against a caller-supplied bound

    Args:
        f: Map family R^n -> R^n
        u: Scalar family on R^n
        expected: Bound as a WavefrontEstimate or a callable base -> allowed indices
        factor: Optional scalar multiplier family, e.g. a Jacobian
        bases: Base points of the estimate
    """
    pulled = u.composed(f)
    if factor is not None:
        pulled = _product(pulled, factor)
    estimate = wavefront_estimate(pulled, bases=bases, **estimator_options)
    report = containment(estimate, expected)
    log.info(f"Pullback containment {'holds' if report.contained else 'fails'} for {pulled.name}")
    return report


# Characteristic pullbacks


class CharacteristicMap:
    """
    (t, x) -> (t, xi_eps(0; t, x)) for xi' = A_eps(xi), A_eps >= 0 autonomous

    Backward travel times tau(z) = int dz / A_eps are tabulated on each
    interval where A_eps > 0; xi_eps(0; t, x) solves tau(y) = tau(x) - t.
    Zeros of A_eps are rest points.
    """

    def __init__(self, field: MollifiedField, window: Tuple[float, float], t_max: float, samples: int = 4001):
        coefficient = field.coefficient
        if coefficient.dim != 1 or not is_autonomous(coefficient):
            raise InvalidArgumentError("characteristic pullbacks need an autonomous scalar coefficient")
        self.field = field
        self.t_max = float(t_max)
        sup = float(np.max(np.abs(coefficient.bound(0.0))))
        self.lo = float(window[0]) - self.t_max * sup - 1.0
        self.hi = float(window[1]) + 1.0
        self.samples = int(samples)

    @lru_cache(maxsize=32)
    def _table(self, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Nodes, speeds, positivity-interval labels (0 at rest points) and travel times per interval"""
        z = np.linspace(self.lo, self.hi, self.samples)
        speed = self.field(eps, 0.0, z[:, None])[:, 0]
        scale = max(1.0, float(np.max(np.abs(speed))))
        if np.any(speed < -1e-12 * scale):
            raise InvalidArgumentError("the regularized field must be non-negative", eps=eps)
        positive = speed > 1e-12 * scale
        labels = np.cumsum(np.concatenate([[positive[0]], positive[1:] & ~positive[:-1]])) * positive
        tau = np.zeros(z.size)
        for label in np.unique(labels[labels > 0]):
            index = np.flatnonzero(labels == label)
            tau[index] = cumulative_trapezoid(1.0 / speed[index], z[index], initial=0)
        return z, speed, labels, tau

    def backward(self, eps: float, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        """xi_eps(0; t, x)"""
        z, speed, labels, tau_all = self._table(float(eps))
        out = np.asarray(x, dtype=float).copy()
        position = np.clip(np.searchsorted(z, x), 0, z.size - 1)
        for label in np.unique(labels[position]):
            if label == 0:
                continue
            index = np.flatnonzero(labels == label)
            mine = labels[position] == label
            zs, taus = z[index], tau_all[index]
            target = np.interp(x[mine], zs, taus) - t[mine]
            y = np.interp(target, taus, zs)
            if index[0] == 0:
                # constant speed continuation to the left of the table
                below = target < taus[0]
                y[below] = zs[0] - (taus[0] - target[below]) * speed[index[0]]
            out[mine] = y
        return out

    def jacobian(self, eps: float, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        """d_x xi_eps(0; t, x) = A_eps(xi) / A_eps(x), one at rest points"""
        z, speed, _, _ = self._table(float(eps))
        start = self.backward(eps, t, x)
        here = np.interp(x, z, speed)
        there = np.interp(start, z, speed, left=speed[0])
        positive = here > 1e-12 * max(1.0, float(np.max(speed)))
        return np.where(positive, there / np.where(positive, here, 1.0), 1.0)

    def families(self, eps_grid: Optional[Sequence[float]] = None) -> Tuple[EpsFamily, EpsFamily]:
        grid = self.field.mollifier.eps_grid() if eps_grid is None else eps_grid

        def map_fn(eps: float, X: np.ndarray) -> np.ndarray:
            return np.column_stack([X[:, 0], self.backward(eps, X[:, 0], X[:, 1])])

        def jacobian_fn(eps: float, X: np.ndarray) -> np.ndarray:
            return self.jacobian(eps, X[:, 0], X[:, 1])[:, None]

        name = f"characteristics of {self.field.coefficient!r}"
        return (
            EpsFamily(grid, map_fn, 2, 2, natural=True, name=name),
            EpsFamily(grid, jacobian_fn, 2, 1, natural=True, name=f"d_x {name}"),
        )


def characteristic_pullback_map(
    field: MollifiedField,
    window: Tuple[float, float] = (-1.5, 1.5),
    t_max: float = 1.5,
    eps_grid: Optional[Sequence[float]] = None,
) -> Tuple[EpsFamily, EpsFamily]:
    """(t, x) -> (t, xi_eps(0; t, x)) and its x-derivative as eps-families"""
    return CharacteristicMap(field, window, t_max).families(eps_grid)
