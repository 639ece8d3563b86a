"""
Filippov solver service
Event-driven integration of x' in A(t, x) with crossing and sliding classification
"""

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from nsflow.core.config import settings
from nsflow.core.exceptions import NumericalFailureError, RefusedError, UnsupportedConfigurationError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import CellField, Coefficient, EssentialHull
from nsflow.models.trajectory import DenseSegment, Trajectory, TrajectoryEvent, evaluate_segments
from nsflow.schemas.reports import ConditionReport, InclusionReport
from nsflow.services.condition_checker import check_filippov
from nsflow.utils.quadrature import panel_rule

MAX_SWITCHES = 10000


@dataclass
class _Mode:
    """Integration mode between two events"""

    field: Optional[Callable] = None
    sliding_on: Optional[int] = None
    repelling: bool = False
    pinned: Dict[int, int] = dataclass_field(default_factory=dict)


def _sigma(coefficient: Coefficient, surface: int, field: Callable, t: float, x: np.ndarray) -> float:
    """Normal speed d/dt g(t, xi(t)) of a field at a surface point"""
    s = coefficient.surfaces[surface]
    return float(s.dt(t, *x)) + float(np.dot(s.gradient(t, x), field(t, x)))


class FilippovSolver:
    """
    Integrates the smooth field of the current cell with adaptive Runge-Kutta
    and stops on surface events. At each event the one-sided normal speeds
    sigma_- and sigma_+ decide between crossing and sliding. Sliding uses the
    convex combination of the one-sided limits tangent to the surface.
    """

    def __init__(self, hull: EssentialHull, method: str = "DOP853"):
        self.hull = hull
        self.coefficient = hull.coefficient
        self.method = method
        self.rtol = settings.ode_rtol
        self.atol = settings.ode_atol
        self._fc_report: Optional[ConditionReport] = None

    def fc_report(self) -> ConditionReport:
        """FC report of the coefficient, checked once per solver"""
        if self._fc_report is None:
            self._fc_report = check_filippov(self.coefficient)
        return self._fc_report

    # Classification

    def _speeds(self, t: float, x: np.ndarray, surface: int) -> Tuple[float, float, CellField, CellField]:
        c = self.coefficient
        minus = c.side_field(t, x, surface, -1)
        plus = c.side_field(t, x, surface, 1)
        return _sigma(c, surface, minus, t, x), _sigma(c, surface, plus, t, x), minus, plus

    def classify(self, t: float, x: np.ndarray, surface: int) -> Tuple[str, int]:
        """
        Mode at a surface point: ("cross", side), ("slide", 0) or ("repel", 0)

        Raises:
            UnsupportedConfigurationError: Both normal speeds vanish with distinct limits
        """
        s_minus, s_plus, minus, plus = self._speeds(t, x, surface)
        scale = max(1.0, abs(s_minus), abs(s_plus))
        tol = 1e-12 * scale
        log.debug(f"surface {surface} at t={t:.6g}: sigma- {s_minus:.3e}, sigma+ {s_plus:.3e}")
        if s_minus > tol and s_plus > tol:
            return "cross", 1
        if s_minus < -tol and s_plus < -tol:
            return "cross", -1
        if s_minus >= -tol and s_plus <= tol:
            if abs(s_minus) <= tol and abs(s_plus) <= tol and np.linalg.norm(minus(t, x) - plus(t, x)) > 1e-12:
                raise UnsupportedConfigurationError(
                    "ambiguous sliding: no tangent convex combination is determined",
                    t=t,
                    x=x.tolist(),
                    surface=str(self.coefficient.surfaces[surface].expr),
                    a_minus=minus(t, x).tolist(),
                    a_plus=plus(t, x).tolist(),
                )
            return "slide", 0
        return "repel", 0

    def sliding_field(
        self, surface: int, minus: CellField, plus: CellField
    ) -> Callable[[float, np.ndarray], np.ndarray]:
        c = self.coefficient

        def field(t: float, x: np.ndarray) -> np.ndarray:
            a_minus, a_plus = minus(t, x), plus(t, x)
            s_minus = _sigma(c, surface, minus, t, x)
            s_plus = _sigma(c, surface, plus, t, x)
            gap = s_plus - s_minus
            lam = 0.5 if abs(gap) < 1e-300 else s_plus / gap
            lam = min(1.0, max(0.0, lam))
            return lam * a_minus + (1.0 - lam) * a_plus

        return field

    # Integration

    def _field_after(self, t: float, x: np.ndarray) -> CellField:
        """Cell field valid just after time t (right-continuous in t)"""
        shifted = t + 1e-9 * max(1.0, abs(t))
        c = self.coefficient
        index = int(c.piece_index(shifted, x[None, :])[0])
        if index < 0:
            return c.field_at(t, x)
        return c.cell_field(index, c.sides(shifted, x))

    def _events(
        self, t: float, x: np.ndarray, pinned: Dict[int, int], skip: Optional[int] = None
    ) -> Tuple[List[Callable], List[int]]:
        """Terminal events on the x-surfaces, each armed against leaving the current side"""
        c = self.coefficient
        events, ids = [], []
        values = c.surface_values(t, x[None, :])[:, 0]
        for j in c.x_surface_ids:
            if j == skip:
                continue
            g = c.surfaces[j].g
            side = pinned.get(j, 1 if values[j] >= 0 else -1)

            def event(s, y, g=g):
                return float(g(s, *y))

            event.terminal = True
            event.direction = -float(side)
            events.append(event)
            ids.append(j)
        return events, ids

    def solve(
        self,
        t0: float,
        x0,
        window: Optional[Tuple[float, float]] = None,
        report: Optional[ConditionReport] = None,
        override: bool = False,
        validate: bool = True,
    ) -> Trajectory:
        """
        Forward Filippov solution from (t0, x0) to the end of the window

        With validate the result is checked against the integral inequality
        and its worst violation is stored as meta["inclusion_residual"].

        Raises:
            RefusedError: The FC report failed and no override was given
            UnsupportedConfigurationError: Sliding on several surfaces at once, or ambiguous sliding
            NumericalFailureError: Integration failure, unbounded switching or an inclusion residual above tol
        """
        c = self.coefficient
        x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
        t_end = float(window[1]) if window is not None else float(c.t_range[1])
        t = float(t0)
        if t_end <= t:
            raise NumericalFailureError("window end must follow the start time", t0=t, t_end=t_end)
        report = report if report is not None else (None if override else self.fc_report())
        if report is not None and report.verdict == "fail":
            if not override:
                raise RefusedError("Filippov conditions fail", witnesses=[w.model_dump() for w in report.witnesses])
            log.warning("Filippov conditions fail; solving anyway on override")
        log.info(f"Filippov solve from t={t:g}, x={x.tolist()} to {t_end:g}")

        max_step = (t_end - t) / 50.0
        breaks = c.time_breaks(t, t_end) + [t_end]
        segments: List[DenseSegment] = []
        events: List[TrajectoryEvent] = []
        state = self._initial_mode(t, x, events)

        for _ in range(MAX_SWITCHES):
            if t >= t_end - 1e-14:
                break
            t_stop = next(b for b in breaks if b > t + 1e-14)

            if state.sliding_on is not None:
                field, sol, exits = self._slide_step(t, x, t_stop, state.sliding_on, max_step)
            else:
                field = state.field or self._field_after(t, x)
                event_fns, ids = self._events(t, x, state.pinned)
                sol = self._run(field, t, x, t_stop, event_fns, max_step)
                exits = [("surface", j) for j in ids]

            fired = self._fired(sol)
            t_next = fired[1] if fired else float(sol.t[-1])
            if t_next > t:
                mode = "sliding" if state.sliding_on is not None else "smooth"
                segments.append(self._segment(sol, t, t_next, field, mode))
            x = fired[2] if fired else sol.y[:, -1].copy()
            t = t_next

            if not fired:
                if t < t_end - 1e-14:
                    events.append(TrajectoryEvent(time=t, kind="time-jump", state=x.tolist()))
                    if state.sliding_on is not None:
                        state = self._classify_on(t, x, state.sliding_on, events, None)
                    else:
                        state = _Mode()
                continue

            kind, target = exits[fired[0]]
            if kind == "exit":
                surface = state.sliding_on
                events.append(
                    TrajectoryEvent(
                        time=t, kind="sliding-exit", surface=surface, state=x.tolist(), detail={"side": target}
                    )
                )
                log.debug(f"Sliding exit at t={t:.6g} to side {target}")
                state = _Mode(field=c.side_field(t, x, surface, target), pinned={surface: target})
                continue
            if state.sliding_on is not None or len(c.active_surfaces(t, x, tol=1e-8)) > 1:
                raise UnsupportedConfigurationError("several surfaces active at once", t=t, x=x.tolist())
            state = self._classify_on(t, x, target, events, "crossing")
        else:
            raise NumericalFailureError("too many mode switches", t=t, x=x.tolist())

        trajectory = self._assemble(t0, t_end, segments, events)
        if not validate:
            return trajectory
        residual = inclusion_residual(trajectory, self.hull)
        if not residual.passed:
            raise NumericalFailureError(
                "trajectory violates the inclusion inequality",
                residual=residual.max_violation,
                tolerance=residual.tolerance,
                worst_times=residual.worst_times,
            )
        return trajectory.model_copy(update={"meta": {**trajectory.meta, "inclusion_residual": residual.max_violation}})

    def _initial_mode(self, t: float, x: np.ndarray, events: List[TrajectoryEvent]) -> "_Mode":
        active = self.coefficient.active_surfaces(t, x)
        if not active:
            return _Mode()
        if len(active) > 1:
            raise UnsupportedConfigurationError("start point lies on several surfaces", t=t, x=x.tolist())
        return self._classify_on(t, x, active[0], events, "start-on-surface")

    def _classify_on(
        self, t: float, x: np.ndarray, surface: int, events: List[TrajectoryEvent], label: Optional[str]
    ) -> "_Mode":
        kind, side = self.classify(t, x, surface)
        if kind == "cross":
            if label is not None:
                events.append(
                    TrajectoryEvent(time=t, kind=label, surface=surface, state=x.tolist(), detail={"side": side})
                )
            return _Mode(field=self.coefficient.side_field(t, x, surface, side), pinned={surface: side})
        if kind == "repel":
            log.warning(f"Repelling surface at t={t:g}, x={x.tolist()}: continuing along the surface")
            events.append(TrajectoryEvent(time=t, kind="repelling-start", surface=surface, state=x.tolist()))
        events.append(TrajectoryEvent(time=t, kind="sliding-start", surface=surface, state=x.tolist()))
        return _Mode(sliding_on=surface, repelling=kind == "repel")

    def _slide_step(self, t: float, x: np.ndarray, t_stop: float, surface: int, max_step: float):
        c = self.coefficient
        s_minus, s_plus, minus, plus = self._speeds(t, x, surface)
        field = self.sliding_field(surface, minus, plus)
        event_fns: List[Callable] = []
        exits: List[Tuple[str, int]] = []
        if not (s_minus < 0 and s_plus > 0):

            def leave_minus(s, y):
                return _sigma(c, surface, minus, s, y)

            def leave_plus(s, y):
                return _sigma(c, surface, plus, s, y)

            # attractive sliding ends when a one-sided field turns away from the surface
            leave_minus.terminal, leave_minus.direction = True, -1.0
            leave_plus.terminal, leave_plus.direction = True, 1.0
            event_fns += [leave_minus, leave_plus]
            exits += [("exit", -1), ("exit", 1)]
        others, other_ids = self._events(t, x, {}, skip=surface)
        event_fns += others
        exits += [("surface", j) for j in other_ids]
        sol = self._run(field, t, x, t_stop, event_fns, max_step)
        return field, sol, exits

    def _run(self, field: Callable, t: float, x: np.ndarray, t_stop: float, events: List[Callable], max_step: float):
        sol = solve_ivp(
            lambda s, y: field(s, y),
            (t, t_stop),
            x,
            method=self.method,
            rtol=self.rtol,
            atol=self.atol,
            events=events or None,
            dense_output=True,
            max_step=max_step,
        )
        if sol.status < 0:
            raise NumericalFailureError("Runge-Kutta integration failed", message=sol.message, t=t, x=x.tolist())
        return sol

    @staticmethod
    def _segment(sol, t_start: float, t_end: float, field: Callable, mode: str) -> DenseSegment:
        dense = sol.sol

        def state_fn(s: np.ndarray) -> np.ndarray:
            s = np.atleast_1d(np.asarray(s, dtype=float))
            return np.asarray(dense(s)).reshape(-1, s.size).T

        def velocity_fn(s: np.ndarray) -> np.ndarray:
            s = np.atleast_1d(np.asarray(s, dtype=float))
            return np.vstack([field(si, yi) for si, yi in zip(s, state_fn(s))])

        return DenseSegment(t_start, t_end, state_fn, velocity_fn, mode)

    @staticmethod
    def _fired(sol) -> Optional[Tuple[int, float, np.ndarray]]:
        if sol.status != 1:
            return None
        for k, times in enumerate(sol.t_events):
            if len(times):
                return k, float(times[0]), np.asarray(sol.y_events[k][0], dtype=float)
        return None

    def _assemble(
        self, t0: float, t_end: float, segments: List[DenseSegment], events: List[TrajectoryEvent]
    ) -> Trajectory:
        if not segments:
            raise NumericalFailureError("solver produced no trajectory segment", t0=t0, t_end=t_end)
        grid = np.linspace(t0, t_end, int(settings.output_samples))
        times = np.union1d(grid, [e.time for e in events if t0 <= e.time <= t_end])
        dim = self.coefficient.dim
        log.info(f"Filippov solve finished: {len(segments)} segments, {len(events)} events")
        return Trajectory(
            times=times,
            states=evaluate_segments(segments, times, dim, "state_fn"),
            velocities=evaluate_segments(segments, times, dim, "velocity_fn"),
            events=events,
            segments=segments,
            meta={"solver": "filippov", "method": self.method, "rtol": self.rtol, "atol": self.atol},
        )


def solve_filippov(
    hull: EssentialHull,
    t0: float,
    x0,
    window: Optional[Tuple[float, float]] = None,
    report: Optional[ConditionReport] = None,
    override: bool = False,
) -> Trajectory:
    return FilippovSolver(hull).solve(t0, x0, window, report=report, override=override)


def inclusion_residual(
    trajectory: Trajectory, hull: EssentialHull, tol: Optional[float] = None, refine: Optional[int] = None
) -> InclusionReport:
    """
    Worst violation of <xi(s) - xi(r), w> <= int_r^s H(tau, xi(tau), w) dtau

    With D_w(s) = <xi(s), w> - int_{t0}^s H, the inequality says D_w is
    non-increasing; the violation is max_s D_w(s) - min_{r <= s} D_w(r).
    The integral uses Gauss panels between refined sample times.
    """
    constants = numerics("solvers")
    tol = float(constants["inclusion_tol"]) if tol is None else tol
    refine = int(constants["dense_refine"]) if refine is None else refine
    base = trajectory.times
    fine = np.concatenate([np.linspace(a, b, refine + 1)[:-1] for a, b in zip(base[:-1], base[1:])] + [base[-1:]])
    W = hull.grid
    nodes, weights = panel_rule(fine, 4)
    H = hull.support(nodes, trajectory.at(nodes), W)
    cell_integrals = (weights[:, None] * H).reshape(fine.size - 1, 4, -1).sum(axis=1)
    integral = np.vstack([np.zeros((1, W.shape[0])), np.cumsum(cell_integrals, axis=0)])
    D = trajectory.at(fine) @ W.T - integral
    running_min = np.minimum.accumulate(D, axis=0)
    excess = D - running_min
    worst = np.unravel_index(int(np.argmax(excess)), excess.shape)
    r_index = int(np.argmin(D[: worst[0] + 1, worst[1]]))
    return InclusionReport(
        max_violation=float(excess[worst]),
        tolerance=tol,
        directions=int(W.shape[0]),
        samples=int(fine.size),
        worst_direction=W[worst[1]].tolist(),
        worst_times=(float(fine[r_index]), float(fine[worst[0]])),
    )
