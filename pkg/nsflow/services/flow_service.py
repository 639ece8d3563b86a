"""
Flow service
Forward and backward flow maps, semigroup self-tests and flow Jacobians
"""

from typing import Literal, Optional

import numpy as np

from nsflow.core.exceptions import InvalidArgumentError, RefusedError
from nsflow.core.expressions import T
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import Coefficient, EssentialHull
from nsflow.models.trajectory import FlowDirection, FlowMap, Trajectory, reverse_time
from nsflow.schemas.reports import ConditionReport, JacobianReport, SemigroupReport
from nsflow.services.caratheodory_solver import CaratheodorySolver
from nsflow.services.condition_checker import check_one_sided_lipschitz
from nsflow.services.filippov_solver import FilippovSolver
from nsflow.utils.quadrature import panel_rule

SEMIGROUP_TOL = 1e-5
JACOBIAN_STEP = 1e-4

FlowMethod = Literal["filippov", "caratheodory"]


def is_autonomous(coefficient: Coefficient) -> bool:
    """True when no piece, region or surface depends on t"""
    exprs = [e for p in coefficient.pieces for e in p.formula_exprs]
    exprs += [e for p in coefficient.pieces for e, _ in p.region_exprs]
    exprs += [s.expr for s in coefficient.surfaces]
    return not any(T in e.free_symbols for e in exprs)


class FlowBuilder:
    """
    Builds chi_t (forward) or Phi_t (backward) from a forward solver

    Backward flows solve b(sigma, x) = -a(-sigma, x) forward from -t and map
    the result back through sigma = -s.
    """

    def __init__(self, coefficient: Coefficient, method: FlowMethod = "filippov"):
        self.coefficient = coefficient
        self.method = method
        self._reversed: Optional[Coefficient] = None

    def _forward_solve(self, coefficient: Coefficient, t0: float, x: np.ndarray, t_end: float) -> Trajectory:
        if self.method == "caratheodory":
            return CaratheodorySolver(coefficient).solve(t0, x, (t0, t_end), override=True)
        return FilippovSolver(EssentialHull(coefficient)).solve(t0, x, (t0, t_end), override=True, validate=False)

    def solve_fn(self, direction: FlowDirection, horizon: float):
        if direction == "forward":
            return lambda anchor, x: self._forward_solve(self.coefficient, anchor, x, horizon)
        if self._reversed is None:
            self._reversed = self.coefficient.time_reversed()
        reversed_coeff = self._reversed
        return lambda anchor, x: reverse_time(self._forward_solve(reversed_coeff, -anchor, x, -horizon))

    def build(
        self,
        direction: FlowDirection,
        anchor: float,
        horizon: float,
        starts: Optional[np.ndarray] = None,
        report: Optional[ConditionReport] = None,
        override: bool = False,
        semigroup: bool = True,
    ) -> FlowMap:
        """
        Flow map with its uniqueness and semigroup reports attached

        Raises:
            RefusedError: The one-sided Lipschitz report for this direction failed without override
        """
        report = report or check_one_sided_lipschitz(self.coefficient, direction)
        if report.verdict == "fail":
            if not override:
                raise RefusedError(
                    f"{direction} flow refused: {report.theory} fails",
                    witnesses=[w.model_dump() for w in report.witnesses],
                )
            log.warning(f"{direction} flow built despite failing {report.theory}")
        log.info(f"Building {direction} flow anchored at t={anchor:g} to {horizon:g}")
        solve = self.solve_fn(direction, horizon)
        flow = FlowMap(anchor, direction, horizon, solve, starts=starts, reports={"osl": report})
        if semigroup and anchor != horizon:
            flow.reports["semigroup"] = self.semigroup_report(flow)
        return flow

    def _test_points(self, flow: FlowMap) -> np.ndarray:
        count = int(numerics("solvers")["semigroup_points"])
        if flow.starts.shape[0]:
            index = np.linspace(0, flow.starts.shape[0] - 1, min(count, flow.starts.shape[0])).round().astype(int)
            return flow.starts[np.unique(index)]
        box = self.coefficient.x_box
        return np.linspace(box[:, 0], box[:, 1], count + 2)[1:-1]

    def semigroup_report(self, flow: FlowMap) -> SemigroupReport:
        """
        max |chi_r(s, chi_t(r, x)) - chi_t(s, x)| over test points and intermediate times

        For autonomous coefficients also max |chi_r(s, x) - chi_t(t + s - r, x)|.
        """
        t, horizon = flow.anchor, flow.horizon
        fractions = (0.25, 0.5, 0.75)
        error, shift_error, cases = 0.0, None, 0
        autonomous = is_autonomous(self.coefficient)
        for x in self._test_points(flow):
            for fr in fractions:
                r = t + fr * (horizon - t)
                restarted = flow.with_anchor(r)
                middle = flow.eval(r, x)
                for s in (r + 0.5 * (horizon - r), horizon):
                    error = max(error, float(np.linalg.norm(restarted.eval(s, middle) - flow.eval(s, x))))
                    cases += 1
                    if autonomous:
                        gap = float(np.linalg.norm(restarted.eval(s, x) - flow.eval(t + s - r, x)))
                        shift_error = gap if shift_error is None else max(shift_error, gap)
        log.debug(f"semigroup self-test: {cases} cases, max error {error:.2e}")
        return SemigroupReport(max_error=error, tolerance=SEMIGROUP_TOL, cases=cases, shift_error=shift_error)


def build_flow(
    coefficient: Coefficient,
    direction: FlowDirection = "forward",
    anchor: float = 0.0,
    horizon: Optional[float] = None,
    starts: Optional[np.ndarray] = None,
    method: FlowMethod = "filippov",
    report: Optional[ConditionReport] = None,
    override: bool = False,
    semigroup: bool = True,
) -> FlowMap:
    if horizon is None:
        horizon = coefficient.t_range[1] if direction == "forward" else coefficient.t_range[0]
    builder = FlowBuilder(coefficient, method)
    return builder.build(
        direction, anchor, horizon, starts=starts, report=report, override=override, semigroup=semigroup
    )


def _crosses_surface(coefficient: Coefficient, trajectory: Trajectory) -> bool:
    if trajectory.events:
        return True
    if not coefficient.x_surface_ids:
        return False
    values = coefficient.surface_values(trajectory.times, trajectory.states)[coefficient.x_surface_ids]
    return bool(np.any(values[:, :-1] * values[:, 1:] <= 0))


def flow_jacobian(flow: FlowMap, coefficient: Coefficient, s: float, x, step: float = JACOBIAN_STEP) -> JacobianReport:
    """
    Central-difference d_x of the flow against exp(int div a along the path)

    Raises:
        RefusedError: The path from x meets a declared surface
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    if n != coefficient.dim:
        raise InvalidArgumentError("point dimension mismatch", expected=coefficient.dim, got=n)
    trajectory = flow.trajectory(x)
    if _crosses_surface(coefficient, trajectory):
        raise RefusedError("flow Jacobian refused: the trajectory meets a declared surface", x=x.tolist())

    jacobian = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        jacobian[:, i] = (flow.eval(s, x + e) - flow.eval(s, x - e)) / (2.0 * step)

    lo, hi = sorted((flow.anchor, float(s)))
    integral = 0.0
    if hi > lo:
        breaks = np.union1d(np.linspace(lo, hi, 65), coefficient.time_breaks(lo, hi))
        nodes, weights = panel_rule(breaks, 4)
        integral = float(np.sum(weights * coefficient.divergence(nodes, trajectory.at(nodes))))
        if s < flow.anchor:
            integral = -integral
    determinant = float(np.linalg.det(jacobian))
    expected = float(np.exp(integral))
    return JacobianReport(
        time=float(s),
        point=x.tolist(),
        jacobian=jacobian.tolist(),
        determinant=determinant,
        expected_determinant=expected,
        divergence_integral=integral,
        error=abs(determinant - expected),
    )
