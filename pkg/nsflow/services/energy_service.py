"""
Energy service
Upwind finite differences for P u = d_t u + a d_x u + c u = f, the energy-estimate
check and the Garding-failure probes
"""

from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad

from nsflow.core.exceptions import InvalidArgumentError, RefusedError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import Coefficient
from nsflow.models.grid import GridSolution
from nsflow.schemas.reports import EnergyReport, GardingReport
from nsflow.utils.mollifiers import l2_normalized_bump, l2_normalized_bump_derivative
from nsflow.utils.quadrature import loglog_slope, panel_rule

FieldLike = Union[Coefficient, Callable[[float, np.ndarray], np.ndarray], float, None]
InitialData = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]

REPORT_POINTS = 101


def _levels(field: FieldLike, times: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """(levels, nodes) array of a coefficient, callable, constant or zero"""
    if field is None:
        return np.zeros((times.size, nodes.size))
    if isinstance(field, Coefficient):
        if field.dim != 1:
            raise InvalidArgumentError("finite differences are one-dimensional", dim=field.dim)
        tt = np.repeat(times, nodes.size)
        X = np.tile(nodes, times.size)[:, None]
        return field(tt, X)[:, 0].reshape(times.size, nodes.size)
    if callable(field):
        return np.vstack([np.broadcast_to(np.asarray(field(float(t), nodes), dtype=float), nodes.shape) for t in times])
    return np.full((times.size, nodes.size), float(field))


class EnergySolver:
    """
    Explicit Euler in time, first-order upwind in space, zero inflow data

    Coefficients may be Coefficient objects, callables (t, x) or constants.
    """

    def __init__(self, a: FieldLike, c: FieldLike = None, f: FieldLike = None):
        self.a = a
        self.c = c
        self.f = f
        self.slack = float(numerics("energy")["slack"])

    def solve(
        self,
        u0: InitialData,
        window: Tuple[float, float] = (0.0, 1.0),
        grid: Tuple[int, int] = (1024, 1024),
        domain: Optional[Tuple[float, float]] = None,
    ) -> GridSolution:
        """
        March u from window[0] to window[1] on grid = (nodes, steps)

        Raises:
            InvalidArgumentError: max |a| dt / dx exceeds 1
        """
        nx, nt = int(grid[0]), int(grid[1])
        if domain is None:
            domain = tuple(self.a.x_box[0]) if isinstance(self.a, Coefficient) else (-4.0, 4.0)
        nodes = np.linspace(domain[0], domain[1], nx)
        times = np.linspace(window[0], window[1], nt + 1)
        dx, dt = float(nodes[1] - nodes[0]), float(times[1] - times[0])

        A = _levels(self.a, times[:-1], nodes)
        cfl = float(np.max(np.abs(A))) * dt / dx
        if cfl > 1.0:
            raise InvalidArgumentError("CFL condition violated", cfl=cfl, dt=dt, dx=dx)
        C = _levels(self.c, times[:-1], nodes)
        F = _levels(self.f, times, nodes)

        values = np.empty((times.size, nx))
        values[0] = u0(nodes) if callable(u0) else np.asarray(u0, dtype=float)
        log.info(f"Upwind march: {nx} nodes, {nt} steps, CFL {cfl:.3f}")
        for n in range(nt):
            u = values[n]
            back = np.diff(u, prepend=0.0) / dx
            ahead = np.diff(u, append=0.0) / dx
            a = A[n]
            values[n + 1] = u - dt * (np.maximum(a, 0.0) * back + np.minimum(a, 0.0) * ahead + C[n] * u - F[n])

        norms = np.sqrt(dx * np.sum(values**2, axis=1))
        source_norms = np.sqrt(dx * np.sum(F**2, axis=1))
        return GridSolution(
            dt=dt, dx=dx, times=times, nodes=nodes, values=values, norms=norms, source_norms=source_norms, cfl=cfl
        )

    # Energy estimate

    def _unbounded_divergence(self, t: float, lo: float, hi: float) -> bool:
        """div a blows up next to a surface: jumps in a, or |div a| growing as the surface is approached"""
        a = self.a
        if not isinstance(a, Coefficient) or not a.has_x_surfaces:
            return False
        distances = 10.0 ** -np.arange(3, 10, dtype=float)
        for p in a.surface_positions(t, lo, hi):
            limits = a.limits(t, np.array([p]))
            if len(limits) > 1 and np.ptp(np.vstack(limits)) > 1e-9:
                return True
            for side in (-1.0, 1.0):
                div = np.abs(a.divergence(t, (p + side * distances)[:, None]))
                if not np.all(np.isfinite(div)):
                    return True
                if div[-1] > 1.0 and loglog_slope(distances, div) < -0.05:
                    return True
        return False

    def h_levels(self, times: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        """h(r) = || div a / 2 - c ||_inf on each time level"""
        if isinstance(self.a, Coefficient):
            tt = np.repeat(times, nodes.size)
            div = self.a.divergence(tt, np.tile(nodes, times.size)[:, None]).reshape(times.size, nodes.size)
        else:
            # callables and constants: centered differences on the grid
            A = _levels(self.a, times, nodes)
            div = np.gradient(A, nodes, axis=1)
        C = _levels(self.c, times, nodes)
        return np.max(np.abs(0.5 * div - C), axis=1)

    def check(self, sol: GridSolution, f: FieldLike = None) -> EnergyReport:
        """
        sup_{r <= t} ||u(r)|| <= exp(int_0^t h) (||u(0)|| + 2 int_0^t ||P u||) with P u = f

        Raises:
            RefusedError: h is not finite, so no Garding inequality holds
        """
        lo, hi = float(sol.nodes[0]), float(sol.nodes[-1])
        probe_times = np.unique([sol.times[0], sol.times[sol.times.size // 2], sol.times[-1]])
        h = self.h_levels(sol.times, sol.nodes)
        if not np.all(np.isfinite(h)) or any(self._unbounded_divergence(float(t), lo, hi) for t in probe_times):
            raise RefusedError(
                "h = ||div a / 2 - c||_inf is not finite; the energy estimate does not apply",
                hint="run the Garding probe (garding_probe, garding_probe_log) on this coefficient",
            )
        if f is None:
            source = sol.source_norms
        else:
            source = np.sqrt(sol.dx * np.sum(_levels(f, sol.times, sol.nodes) ** 2, axis=1))
        lhs = np.maximum.accumulate(sol.norms)
        growth = np.exp(cumulative_trapezoid(h, sol.times, initial=0))
        rhs = growth * (sol.norms[0] + 2.0 * cumulative_trapezoid(source, sol.times, initial=0))
        passed = bool(np.all(lhs <= rhs * (1.0 + self.slack)))
        index = np.unique(np.linspace(0, sol.times.size - 1, min(REPORT_POINTS, sol.times.size)).round().astype(int))
        log.info(f"Energy estimate {'holds' if passed else 'fails'}: max h {float(h.max()):.3g}")
        return EnergyReport(
            verdict="pass" if passed else "fail",
            h=float(h.max()),
            slack=self.slack,
            times=sol.times[index].tolist(),
            lhs=lhs[index].tolist(),
            rhs=rhs[index].tolist(),
        )


def solve_fd(
    a: FieldLike,
    c: FieldLike,
    f: FieldLike,
    u0: InitialData,
    window: Tuple[float, float] = (0.0, 1.0),
    grid: Tuple[int, int] = (1024, 1024),
    domain: Optional[Tuple[float, float]] = None,
) -> GridSolution:
    return EnergySolver(a, c, f).solve(u0, window, grid, domain)


def check_energy_estimate(sol: GridSolution, a: FieldLike, c: FieldLike = None, f: FieldLike = None) -> EnergyReport:
    return EnergySolver(a, c, f).check(sol, f)


# Garding probes


def default_probe_eps() -> np.ndarray:
    return 2.0 ** -np.arange(2, 21, dtype=float)


def quadratic_form(a_fn: Callable[[np.ndarray], np.ndarray], eps: float, center: float = 0.0) -> float:
    """
    <Q v_eps, v_eps> = int a v_eps' v_eps dx for v_eps(x) = eps^-1/2 rho((x - center) / eps)

    With x = center + eps z this is eps^-1 int a(center + eps z) rho'(z) rho(z) dz;
    the panels meet at z = 0 where the probed coefficients are singular.
    """
    z, w = panel_rule(np.linspace(-1.0, 1.0, 33), 16)
    integrand = a_fn(center + eps * z) * l2_normalized_bump_derivative(z) * l2_normalized_bump(z)
    return float(np.sum(w * integrand) / eps)


def _rho_moment(weight: Callable[[float], float]) -> float:
    value, _ = quad(
        lambda z: weight(z) * float(l2_normalized_bump_derivative(np.array(z)) * l2_normalized_bump(np.array(z))),
        0.0,
        1.0,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return float(value)


def holder_coefficient(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    """a(x) = 1 + x_+^alpha for x <= 1, 2 beyond"""

    def a_fn(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x > 1.0, 2.0, 1.0 + np.maximum(x, 0.0) ** alpha)

    return a_fn


def log_coefficient(x: np.ndarray) -> np.ndarray:
    """a(x) = -x log|x| rho(x)"""
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0.0, 1.0, np.abs(x))
    return np.where(x == 0.0, 0.0, -x * np.log(safe) * l2_normalized_bump(x))


def garding_probe(alpha: float, eps_list: Optional[Sequence[float]] = None) -> GardingReport:
    """
    <Q v_eps, v_eps> for a = 1 + x_+^alpha, which behaves like eps^(alpha - 1) C

    Returns the fitted log-log slope and C = int_0^1 z^alpha rho' rho dz.
    """
    if not 0.5 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (1/2, 1)", alpha=alpha)
    eps = default_probe_eps() if eps_list is None else np.asarray(eps_list, dtype=float)
    a_fn = holder_coefficient(alpha)
    values = np.array([quadratic_form(a_fn, e) for e in eps])
    slope = loglog_slope(eps, values)
    constant = _rho_moment(lambda z: z**alpha)
    log.info(f"Garding probe alpha={alpha}: slope {slope:.4f}, constant {constant:.4e}")
    return GardingReport(
        mode="power", alpha=alpha, eps=eps.tolist(), values=values.tolist(), slope=slope, constant=constant
    )


def garding_probe_log(eps_list: Optional[Sequence[float]] = None) -> GardingReport:
    """
    <Q v_eps, v_eps> for a = -x log|x| rho(x)

    The values grow like log(1/eps) times 2 rho(0) int_0^1 z rho' rho dz; the
    slope is fitted against log(1/eps).
    """
    eps = default_probe_eps() if eps_list is None else np.asarray(eps_list, dtype=float)
    values = np.array([quadratic_form(log_coefficient, e) for e in eps])
    slope = float(np.polyfit(np.log(1.0 / eps), values, 1)[0])
    constant = 2.0 * float(l2_normalized_bump(np.array(0.0))) * _rho_moment(lambda z: z)
    return GardingReport(mode="log", eps=eps.tolist(), values=values.tolist(), slope=slope, constant=constant)


def garding_probe_coefficient(
    a: Coefficient, eps_list: Optional[Sequence[float]] = None, center: float = 0.0
) -> GardingReport:
    """Quadratic form for an arbitrary scalar coefficient at t = 0, log-log slope against eps"""
    if a.dim != 1:
        raise InvalidArgumentError("the Garding probe is one-dimensional", dim=a.dim)
    eps = default_probe_eps() if eps_list is None else np.asarray(eps_list, dtype=float)

    def a_fn(x: np.ndarray) -> np.ndarray:
        return a(0.0, np.asarray(x, dtype=float)[:, None])[:, 0]

    values = np.array([quadratic_form(a_fn, e, center) for e in eps])
    return GardingReport(mode="coefficient", eps=eps.tolist(), values=values.tolist(), slope=loglog_slope(eps, values))
