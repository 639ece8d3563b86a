"""
Regularized solver service
Per-eps solves of the mollified equation and sub-shadow extraction across the eps grid
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError, NumericalFailureError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import Coefficient, EssentialHull
from nsflow.models.family import EpsFamily, MollifiedField
from nsflow.models.trajectory import DenseSegment, SubShadow, Trajectory
from nsflow.schemas.problem import MollifierSpec
from nsflow.services.filippov_solver import inclusion_residual
from nsflow.services.generalized_graph import GeneralizedGraph
from nsflow.utils.grids import direction_grid

# ODEPACK keeps a single global integrator handle
SERIAL_METHODS = frozenset({"LSODA"})


class RegularizedSolver:
    """
    Solves xi' = A_eps(s, xi) for every eps of the grid and extracts a sub-shadow

    A_eps is the space mollification of a at scale gamma_eps. Steep
    mollified fields become stiff as eps shrinks, so the per-eps solves use
    LSODA with automatic stiffness switching.
    """

    def __init__(self, coefficient: Coefficient, mollifier: Optional[MollifierSpec] = None, method: str = "LSODA"):
        constants = numerics("solvers")
        self.coefficient = coefficient
        self.mollifier = mollifier or MollifierSpec()
        self.field = MollifiedField(coefficient, self.mollifier)
        self.method = method
        self.cauchy_tol = float(constants["cauchy_tol"])
        self.min_subgrid = int(constants["min_subgrid"])
        self.shadow_times = int(constants["shadow_times"])
        self.shadow_tol = float(constants["shadow_tol"])

    def solve_one(self, eps: float, t0: float, x0: np.ndarray, t_end: float) -> Trajectory:
        field = self.field
        gamma = field.scale(eps)

        def rhs(s: float, y: np.ndarray) -> np.ndarray:
            return field(eps, s, y[None, :])[0]

        sol = solve_ivp(
            rhs,
            (t0, t_end),
            x0,
            method=self.method,
            rtol=settings.ode_rtol,
            atol=settings.ode_atol,
            dense_output=True,
            max_step=(t_end - t0) / 50.0,
        )
        if sol.status < 0:
            raise NumericalFailureError("regularized integration failed", eps=eps, message=sol.message)
        dense = sol.sol

        def state_fn(s: np.ndarray) -> np.ndarray:
            s = np.atleast_1d(np.asarray(s, dtype=float))
            return np.asarray(dense(s)).reshape(-1, s.size).T

        def velocity_fn(s: np.ndarray) -> np.ndarray:
            s = np.atleast_1d(np.asarray(s, dtype=float))
            return np.vstack([field(eps, si, yi[None, :]) for si, yi in zip(s, state_fn(s))])

        segment = DenseSegment(t0, t_end, state_fn, velocity_fn, "regularized")
        times = np.linspace(t0, t_end, int(settings.output_samples))
        states = state_fn(times)
        return Trajectory(
            times=times,
            states=states,
            velocities=velocity_fn(times),
            segments=[segment],
            meta={"solver": "regularized", "eps": eps, "gamma": gamma, "method": self.method, "steps": int(sol.t.size)},
        )

    def solve_family(self, eps_grid: Sequence[float], t0: float, x0, t_end: float) -> Dict[float, Trajectory]:
        """Independent per-eps solves on a thread pool capped by settings.threads, one at a time for LSODA"""
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        workers = 1 if self.method in SERIAL_METHODS else max(1, settings.threads)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {eps: pool.submit(self.solve_one, float(eps), t0, x0, t_end) for eps in eps_grid}
            return {eps: future.result() for eps, future in futures.items()}

    def extract_shadow(self, trajectories: Dict[float, Trajectory], t0: float, t_end: float) -> SubShadow:
        """
        Cauchy test across the eps grid

        Gaps are sup-norm distances of consecutive eps on the shadow times.
        The full grid converges when its final gap is below the tolerance;
        otherwise the run of consecutive eps (at least min_subgrid long) with
        the smallest worst gap is selected. Shorter grids that fail the full
        test are diverged.
        """
        grid = sorted(trajectories, reverse=True)
        times = np.linspace(t0, t_end, self.shadow_times)
        samples = [trajectories[eps].at(times) for eps in grid]
        gaps = [float(np.max(np.linalg.norm(b - a, axis=1))) for a, b in zip(samples[:-1], samples[1:])]
        log.debug(f"sub-shadow Cauchy gaps: {[f'{g:.2e}' for g in gaps]}")

        if gaps and gaps[-1] < self.cauchy_tol:
            used, verdict, window_gaps = grid, "converged", gaps
        elif len(grid) < self.min_subgrid:
            used, verdict, window_gaps = grid, "diverged", gaps
            log.warning(f"eps grid of {len(grid)} values is not Cauchy and too short for a sub-grid (diverged)")
        else:
            best: Optional[Tuple[float, int, int]] = None
            span = self.min_subgrid
            for start in range(0, len(grid) - span + 1):
                for stop in range(start + span, len(grid) + 1):
                    worst = max(gaps[start : stop - 1], default=0.0)
                    if best is None or worst < best[0] or (worst == best[0] and stop > best[2]):
                        best = (worst, start, stop)
            worst, start, stop = best
            used, window_gaps = grid[start:stop], gaps[start : stop - 1]
            verdict = "subnet-selected" if worst < self.cauchy_tol else "diverged"
            log.warning(f"eps grid is not Cauchy; sub-grid of {len(used)} values has worst gap {worst:.2e} ({verdict})")

        return SubShadow(
            limit=trajectories[used[-1]],
            eps_used=[float(e) for e in used],
            convergence=window_gaps,
            verdict=verdict,
            tolerance=self.cauchy_tol,
            meta={"all_gaps": gaps},
        )

    def shadow_residual(self, limit: Trajectory, directions: Optional[np.ndarray] = None, times: int = 21) -> float:
        """
        Worst excess in <zeta(s) - zeta(r), w> <= int_r^s H_A(tau, zeta(tau), w) dtau

        H_A is the generalized-graph support of the mollified family at each
        sample time, integrated with the trapezoid rule.
        """
        W = direction_grid(self.coefficient.dim, 16) if directions is None else directions
        s = np.linspace(limit.t_start, limit.t_end, times)
        zeta = limit.at(s)
        H = np.empty((s.size, W.shape[0]))
        for i, (tau, point) in enumerate(zip(s, zeta)):
            graph = GeneralizedGraph(EpsFamily.mollified(self.field, float(tau)))
            H[i] = graph.support_many(point, W)
        integral = cumulative_trapezoid(H, s, axis=0, initial=0)
        D = zeta @ W.T - integral
        return float(np.max(D - np.minimum.accumulate(D, axis=0)))

    def solve(
        self,
        t0: float,
        x0,
        window: Optional[Tuple[float, float]] = None,
        eps_grid: Optional[Sequence[float]] = None,
        validate: bool = True,
    ) -> Tuple[EpsFamily, SubShadow]:
        """
        Regularized family and its sub-shadow

        Returns:
            (family s -> xi_eps(s), sub-shadow with residual diagnostics in meta)

        Raises:
            NumericalFailureError: The limit breaks the generalized-graph inequality by more than shadow_tol
        """
        t_end = float(window[1]) if window is not None else float(self.coefficient.t_range[1])
        if t_end <= t0:
            raise InvalidArgumentError("window end must follow the start time", t0=t0, t_end=t_end)
        grid = list(self.mollifier.eps_grid() if eps_grid is None else eps_grid)
        log.info(f"Regularized solve over {len(grid)} eps values, {self.mollifier.kind}/{self.mollifier.scale}")
        trajectories = self.solve_family(grid, t0, x0, t_end)
        shadow = self.extract_shadow(trajectories, t0, t_end)
        if validate:
            meta = dict(shadow.meta)
            meta["filippov_residual"] = inclusion_residual(shadow.limit, EssentialHull(self.coefficient)).max_violation
            meta["shadow_residual"] = self.shadow_residual(shadow.limit)
            shadow = shadow.model_copy(update={"meta": meta})
            if meta["shadow_residual"] > self.shadow_tol:
                raise NumericalFailureError(
                    "sub-shadow limit violates the generalized-graph inequality",
                    residual=meta["shadow_residual"],
                    tolerance=self.shadow_tol,
                    verdict=shadow.verdict,
                )
        log.info(f"Regularized solve finished: verdict {shadow.verdict}")
        return EpsFamily.from_trajectories(trajectories), shadow


def solve_regularized(
    coefficient: Coefficient,
    mollifier: Optional[MollifierSpec],
    eps_grid: Optional[Sequence[float]],
    t0: float,
    x0,
    window: Optional[Tuple[float, float]] = None,
    validate: bool = True,
) -> Tuple[EpsFamily, SubShadow]:
    return RegularizedSolver(coefficient, mollifier).solve(t0, x0, window, eps_grid=eps_grid, validate=validate)


def shadow_errors(family: EpsFamily, oracle, times: np.ndarray) -> List[float]:
    """Sup-norm error of every member against a closed-form limit, in eps-grid order"""
    expected = np.atleast_2d(np.asarray([oracle(s) for s in times], dtype=float).reshape(times.size, -1))
    return [float(np.max(np.abs(family.value_at(eps, times) - expected))) for eps in family.eps_grid]
