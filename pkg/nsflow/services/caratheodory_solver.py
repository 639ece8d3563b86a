"""
Caratheodory solver service
Delayed-argument Euler construction with Richardson extrapolation over the delay
"""

from typing import List, Optional, Tuple

import numpy as np

from nsflow.core.config import settings
from nsflow.core.exceptions import NumericalFailureError, RefusedError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import Coefficient
from nsflow.models.trajectory import Trajectory
from nsflow.schemas.reports import ConditionReport
from nsflow.services.condition_checker import check_caratheodory
from nsflow.utils.quadrature import panel_rule


class CaratheodorySolver:
    """
    Builds xi_k(s) = x + int_t^{max(t, s - lam)} a(tau + lam, xi_k(tau)) dtau with lam = |J| / k

    Each delay block only needs the previous block, so the construction
    marches block by block. The delayed iterates are first order in lam;
    eta_k = 2 xi_{2k} - xi_k removes the leading term, and k doubles until
    successive extrapolants agree on the coarse grid.
    """

    def __init__(
        self,
        coefficient: Coefficient,
        k0: Optional[int] = None,
        substeps: Optional[int] = None,
        tol: Optional[float] = None,
        max_levels: Optional[int] = None,
    ):
        constants = numerics("solvers")
        self.coefficient = coefficient
        self.k0 = int(constants["carath_k0"]) if k0 is None else int(k0)
        self.substeps = int(constants["carath_substeps"]) if substeps is None else int(substeps)
        self.tol = float(constants["carath_tol"]) if tol is None else float(tol)
        self.max_levels = int(constants["carath_max_levels"]) if max_levels is None else int(max_levels)

    def iterate(self, t0: float, x0: np.ndarray, t_end: float, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Delayed Euler iterate xi_k on its node grid

        Args:
            t0: Start time t
            x0: Start point x
            t_end: End of the window
            k: Number of delay blocks

        Returns:
            (nodes, states) with k * substeps + 1 nodes
        """
        c = self.coefficient
        m = self.substeps
        lam = (t_end - t0) / k
        s = t0 + (t_end - t0) * np.arange(k * m + 1) / (k * m)
        n = x0.size
        xi = np.tile(x0, (s.size, 1))
        integral = np.zeros((s.size, n))
        # times tau where tau + lam meets a jump in t
        shifted = np.asarray(c.time_breaks(t0 + lam, t_end + lam)) - lam

        for b in range(k - 1):
            lo, hi = b * m, (b + 1) * m
            cells = s[lo : hi + 1]
            inner = shifted[(shifted > cells[0]) & (shifted < cells[-1])]
            breaks = np.union1d(cells, inner)
            nodes, weights = panel_rule(breaks, 2)
            states = np.column_stack([np.interp(nodes, cells, xi[lo : hi + 1, d]) for d in range(n)])
            values = c(nodes + lam, states)
            panels = (weights[:, None] * values).reshape(-1, 2, n).sum(axis=1)
            running = np.vstack([np.zeros((1, n)), np.cumsum(panels, axis=0)])
            integral[lo : hi + 1] = integral[lo] + running[np.searchsorted(breaks, cells)]
            xi[lo + m : hi + m + 1] = x0 + integral[lo : hi + 1]
        return s, xi

    def _residual(self, t0: float, x0: np.ndarray, s: np.ndarray, xi: np.ndarray) -> float:
        """max |xi(s) - x - int_t^s a(tau, xi(tau)) dtau| on the node grid"""
        c = self.coefficient
        n = x0.size
        breaks = np.union1d(s, c.time_breaks(s[0], s[-1]))
        nodes, weights = panel_rule(breaks, 2)
        states = np.column_stack([np.interp(nodes, s, xi[:, d]) for d in range(n)])
        panels = (weights[:, None] * c(nodes, states)).reshape(-1, 2, n).sum(axis=1)
        running = np.vstack([np.zeros((1, n)), np.cumsum(panels, axis=0)])[np.searchsorted(breaks, s)]
        return float(np.max(np.abs(xi - x0 - running)))

    def solve(
        self,
        t0: float,
        x0,
        window: Optional[Tuple[float, float]] = None,
        report: Optional[ConditionReport] = None,
        override: bool = False,
    ) -> Trajectory:
        """
        Caratheodory solution on [t0, window end]

        Raises:
            RefusedError: The CC report failed and no override was given
            NumericalFailureError: Extrapolants did not settle within the level budget
        """
        c = self.coefficient
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        t_end = float(window[1]) if window is not None else float(c.t_range[1])
        if t_end <= t0:
            raise NumericalFailureError("window end must follow the start time", t0=t0, t_end=t_end)
        report = report if report is not None else (None if override else check_caratheodory(c))
        if report is not None and report.verdict == "fail":
            if not override:
                raise RefusedError("Caratheodory conditions fail", witnesses=[w.model_dump() for w in report.witnesses])
            log.warning("Caratheodory conditions fail; solving anyway on override")

        log.info(f"Caratheodory solve from t={t0:g}, x={x0.tolist()} to {t_end:g}")
        k = self.k0
        _, xi_k = self.iterate(t0, x0, t_end, k)
        s_2k, xi_2k = self.iterate(t0, x0, t_end, 2 * k)
        eta = 2.0 * xi_2k[::2] - xi_k
        gaps: List[float] = []
        for level in range(self.max_levels):
            s_4k, xi_4k = self.iterate(t0, x0, t_end, 4 * k)
            eta_next = 2.0 * xi_4k[::2] - xi_2k
            gap = float(np.max(np.abs(eta_next[::2] - eta)))
            gaps.append(gap)
            log.debug(f"Caratheodory level {level}: k={2 * k}, gap {gap:.3e}")
            k, s_2k, xi_2k, eta, s_final = 2 * k, s_4k, xi_4k, eta_next, s_2k
            if gap < self.tol:
                break
        else:
            raise NumericalFailureError("delayed Euler iterates did not converge", gaps=gaps, k=k)

        residual = self._residual(t0, x0, s_final, eta)
        if residual >= 10.0 * self.tol:
            raise NumericalFailureError("integral equation residual too large", residual=residual, gaps=gaps)

        times = np.union1d(np.linspace(t0, t_end, int(settings.output_samples)), c.time_breaks(t0, t_end))
        states = np.column_stack([np.interp(times, s_final, eta[:, d]) for d in range(x0.size)])
        log.info(f"Caratheodory solve finished: k={k}, residual {residual:.2e}")
        return Trajectory(
            times=times,
            states=states,
            velocities=c(times, states),
            meta={
                "solver": "caratheodory",
                "k": k,
                "substeps": self.substeps,
                "gaps": gaps,
                "tolerance": self.tol,
                "integral_residual": residual,
            },
        )


def solve_caratheodory(
    coefficient: Coefficient,
    t0: float,
    x0,
    window: Optional[Tuple[float, float]] = None,
    k0: Optional[int] = None,
    report: Optional[ConditionReport] = None,
    override: bool = False,
) -> Trajectory:
    return CaratheodorySolver(coefficient, k0=k0).solve(t0, x0, window, report=report, override=override)
