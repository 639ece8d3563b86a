"""
Generalized graph service
Supporting-function estimates, cluster-value slices and composition bounds for eps-families
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError, NumericalFailureError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.family import EpsFamily, GraphSlice
from nsflow.schemas.reports import CompositionReport
from nsflow.services.set_calculus import convex_hull_of_samples
from nsflow.utils.grids import ball_grid, delta_schedule, normalize


class GeneralizedGraph:
    """
    Finite-resolution view of Graph(F) for one eps-family

    Level j samples F_mu(y) for y on a grid of the ball B_delta_j(x) and
    grid values mu <= delta_j. Supports are sups over a level; cluster values
    are level values that reappear one level up within cluster_tol.
    """

    def __init__(self, family: EpsFamily, deltas: Optional[Sequence[float]] = None):
        self.constants = numerics("ggraph")
        self.family = family
        if deltas is None:
            first, last = self.constants["delta_exponents"]
            deltas = delta_schedule(int(first), int(last))
        self.deltas = np.asarray(deltas, dtype=float)
        if np.any(np.diff(self.deltas) >= 0):
            raise InvalidArgumentError("delta schedule must be decreasing", deltas=self.deltas.tolist())
        self.y_points = int(self.constants["y_points"])

    def level_values(self, x, delta: float) -> np.ndarray:
        """All sampled F_mu(y), y in B_delta(x), mu <= delta; shape (samples, m)"""
        Y = ball_grid(np.atleast_1d(np.asarray(x, dtype=float)), delta, self.y_points)
        mus = self.family.eps_grid[self.family.eps_grid <= delta * (1.0 + 1e-12)]
        if mus.size == 0:
            mus = self.family.eps_grid[-1:]
        with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
            blocks = list(pool.map(lambda mu: self.family.value_at(mu, Y), mus))
        return np.vstack(blocks)

    def support_sequence(self, x, W: np.ndarray) -> np.ndarray:
        """(levels, directions) array of level sups of <F, w>"""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        return np.vstack([np.max(self.level_values(x, delta) @ W.T, axis=0) for delta in self.deltas])

    def _check_monotone(self, sequence: np.ndarray, x, W: np.ndarray) -> None:
        tol = float(self.constants["monotone_tol"])
        rises = np.diff(sequence, axis=0) - tol * np.maximum(1.0, np.abs(sequence[:-1]))
        if np.any(rises > 0):
            level, k = np.unravel_index(int(np.argmax(rises)), rises.shape)
            raise NumericalFailureError(
                "support sequence is not non-increasing in delta",
                x=np.atleast_1d(x).tolist(),
                direction=W[k].tolist(),
                sequence=sequence[:, k].tolist(),
                level=int(level) + 1,
            )

    def support_many(self, x, W: np.ndarray, check: bool = True) -> np.ndarray:
        W = normalize(W)
        sequence = self.support_sequence(x, W)
        if check:
            self._check_monotone(sequence, x, W)
        return sequence[-1]

    def support(self, x, w) -> float:
        """
        H_F(x, w) as the finest-level sup

        Raises:
            NumericalFailureError: The level sequence rises beyond monotone_tol
        """
        return float(self.support_many(x, np.atleast_2d(np.asarray(w, dtype=float)))[0])

    def slice(self, x) -> GraphSlice:
        """Cluster values at x and their convex hull"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        coarse = self.level_values(x, float(self.deltas[-2])) if self.deltas.size > 1 else None
        fine = self.level_values(x, float(self.deltas[-1]))
        tol = float(self.constants["cluster_tol"])
        clusters = fine
        fallback = coarse is None
        if coarse is not None:
            distances, _ = cKDTree(coarse).query(fine, k=1)
            clusters = fine[distances <= tol]
            if clusters.size == 0:
                clusters, fallback = fine, True
        if fallback:
            log.warning(f"no stable cluster values at x={x.tolist()}; using all finest-level values")
        clusters = np.unique(np.round(clusters, 12), axis=0)
        body = convex_hull_of_samples(clusters)
        meta = {"fallback": fallback, "samples": int(fine.shape[0])}
        if self.family.natural and clusters.shape[1] == 1:
            # connected slices of scalar natural families are intervals spanning all clusters
            meta["interval"] = [float(clusters.min()), float(clusters.max())]
        return GraphSlice(
            base_x=x.tolist(),
            values=body,
            points=clusters,
            resolution=(float(self.deltas[-1]), float(self.family.eps_grid[-1])),
            meta=meta,
        )


def _probe_points(body_points: np.ndarray, count: int) -> np.ndarray:
    """Up to count representatives spread over a cluster set"""
    if body_points.shape[0] <= count:
        return body_points
    if body_points.shape[1] == 1:
        lo, hi = float(body_points.min()), float(body_points.max())
        return np.linspace(lo, hi, count)[:, None]
    index = np.linspace(0, body_points.shape[0] - 1, count).round().astype(int)
    return body_points[np.unique(index)]


def graph_support(family: EpsFamily, x, w, deltas: Optional[Sequence[float]] = None) -> float:
    return GeneralizedGraph(family, deltas).support(x, w)


def graph_slice(family: EpsFamily, x, deltas: Optional[Sequence[float]] = None) -> GraphSlice:
    return GeneralizedGraph(family, deltas).slice(x)


def check_composition_bound(
    outer: EpsFamily, inner: EpsFamily, x, deltas: Optional[Sequence[float]] = None, tol: float = 1e-2
) -> Tuple[bool, CompositionReport]:
    """
    Graph(F o G)_x against the union of Graph(F)_z over z in Graph(G)_x

    Returns:
        (contained, report with the worst support-inequality violation)
    """
    probes = int(numerics("ggraph")["composition_probes"])
    composed = graph_slice(outer.composed(inner), x, deltas)
    inner_slice = graph_slice(inner, x, deltas)
    bound_points: List[np.ndarray] = []
    for z in _probe_points(inner_slice.points, probes):
        bound_points.append(graph_slice(outer, z, deltas).points)
    bound = np.unique(np.vstack(bound_points), axis=0)
    hull = convex_hull_of_samples(bound)
    violations = [hull.violation(p) for p in composed.points]
    worst = float(max(violations, default=0.0))
    report = CompositionReport(
        base_x=np.atleast_1d(np.asarray(x, dtype=float)).tolist(),
        contained=worst <= tol,
        worst_violation=worst,
        tolerance=tol,
        composed_points=composed.points.tolist(),
        bound_points=bound.tolist(),
    )
    log.debug(f"composition bound at x={report.base_x}: worst violation {worst:.3e}")
    return report.contained, report
