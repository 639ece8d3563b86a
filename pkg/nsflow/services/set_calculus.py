"""
Set calculus service
Support-function algebra, Hausdorff metric, set-valued integrals and selections
"""

from typing import Optional

import numpy as np
from scipy.integrate import quad_vec
from scipy.spatial import ConvexHull, QhullError

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError, NumericalFailureError, UnsupportedError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.convex import ConvexBody, SetValuedPath
from nsflow.models.trajectory import Trajectory


def _point_array(value) -> np.ndarray:
    return np.atleast_1d(np.asarray(value, dtype=float))


def make_point(point) -> ConvexBody:
    return ConvexBody.from_generators(_point_array(point)[None, :], kind="point")


def make_ball(center, radius: float) -> ConvexBody:
    """Closed ball: h(w) = <center, w> + radius |w|"""
    if radius < 0 or not np.isfinite(radius):
        raise InvalidArgumentError("ball radius must be a finite non-negative number", radius=radius)
    center = _point_array(center)
    kind = "ball" if radius > 0 else "point"
    return ConvexBody.from_generators(center[None, :], radius=float(radius), kind=kind)


def make_box(lower, upper) -> ConvexBody:
    """Interval product prod [lower_i, upper_i]"""
    lower, upper = _point_array(lower), _point_array(upper)
    if lower.shape != upper.shape or np.any(lower > upper):
        raise InvalidArgumentError("box bounds must satisfy lower <= upper", lower=lower.tolist(), upper=upper.tolist())
    corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(lower.size, -1).T
    return ConvexBody.from_generators(np.unique(corners, axis=0), kind="interval-product")


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    """Extreme points of a finite set; falls back to all points on degenerate input"""
    points = np.unique(points, axis=0)
    if points.shape[1] == 1:
        return np.array([[points.min()], [points.max()]]) if points.shape[0] > 1 else points
    if points.shape[0] <= points.shape[1] + 1:
        return points
    try:
        hull = ConvexHull(points)
    except QhullError:
        return points
    return points[hull.vertices]


def convex_hull_of_samples(points) -> ConvexBody:
    """Convex hull of a finite point set: h(w) = max <x, w>"""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        raise InvalidArgumentError("convex hull of an empty set")
    points = points.reshape(-1, 1) if points.ndim == 1 else points
    vertices = _hull_vertices(points)
    kind = "point" if vertices.shape[0] == 1 else "polytope"
    return ConvexBody.from_generators(vertices, kind=kind)


def _check_pair(first: ConvexBody, second: ConvexBody) -> None:
    if first.dim != second.dim:
        raise InvalidArgumentError("dimension mismatch", first=first.dim, second=second.dim)


def _merged_grid(first: ConvexBody, second: ConvexBody) -> np.ndarray:
    if first.grid.shape == second.grid.shape and np.array_equal(first.grid, second.grid):
        return first.grid
    return np.unique(np.vstack([first.grid, second.grid]).round(15), axis=0)


def hausdorff_distance(first: ConvexBody, second: ConvexBody) -> float:
    """d(M, N) = sup_w |h_M(w) - h_N(w)| over the union of both grids"""
    _check_pair(first, second)
    if not (first.bounded and second.bounded):
        raise UnsupportedError("Hausdorff distance of an unbounded body")
    grid = _merged_grid(first, second)
    return float(np.max(np.abs(first.support_at(grid) - second.support_at(grid))))


def minkowski_sum(first: ConvexBody, second: ConvexBody) -> ConvexBody:
    """M + N: support functions add"""
    _check_pair(first, second)
    limit = int(numerics("setcalc")["vertex_pair_limit"])
    if first.exact and second.exact and first.vertices.shape[0] * second.vertices.shape[0] <= limit:
        sums = (first.vertices[:, None, :] + second.vertices[None, :, :]).reshape(-1, first.dim)
        vertices = _hull_vertices(sums)
        radius = first.radius + second.radius
        if vertices.shape[0] == 1:
            kind = "ball" if radius > 0 else "point"
        elif radius > 0:
            kind = "sampled"
        elif first.kind == second.kind == "interval-product":
            kind = "interval-product"
        else:
            kind = "polytope"
        return ConvexBody.from_generators(vertices, radius=radius, kind=kind, grid=_merged_grid(first, second))

    grid = _merged_grid(first, second)
    return ConvexBody.sampled(grid, first.support_at(grid) + second.support_at(grid))


def setvalued_integral(path: SetValuedPath, t: float, s: float) -> ConvexBody:
    """
    Set-valued integral from t to s

    For s >= t the support is int_t^s H(tau, w) dtau on each grid direction.
    For s < t the result is -(int_s^t F), i.e. support w -> int_s^t H(tau, -w).

    Raises:
        InvalidArgumentError: Interval not inside the path domain
        NumericalFailureError: Adaptive quadrature did not converge
    """
    if not path.covers(t, s):
        raise InvalidArgumentError("integration interval outside path domain", t=t, s=s, domain=[path.t0, path.t1])
    lo, hi = min(t, s), max(t, s)
    directions = path.grid if s >= t else -path.grid
    if hi == lo:
        return ConvexBody.sampled(path.grid, np.zeros(path.grid.shape[0]))

    probe = path.support(lo, directions)
    if not np.all(np.isfinite(probe)):
        raise UnsupportedError("set-valued integral of an unbounded path", time=lo)

    points = [b for b in path.breaks if lo < b < hi] or None
    values, error, info = quad_vec(
        lambda tau: path.support(tau, directions),
        lo,
        hi,
        epsabs=settings.quad_epsabs,
        epsrel=settings.quad_epsrel,
        limit=settings.quad_limit,
        norm="max",
        points=points,
        full_output=True,
    )
    if not info.success:
        raise NumericalFailureError(
            "set-valued integral did not converge",
            t=t,
            s=s,
            error_estimate=float(error),
            intervals=int(info.intervals.shape[0]),
        )
    return ConvexBody.sampled(path.grid, values)


def path_l1_distance(first: SetValuedPath, second: SetValuedPath, t0: float, t1: float) -> float:
    """int_{t0}^{t1} d(F_tau, G_tau) dtau on one compact time interval"""
    if first.dim != second.dim:
        raise InvalidArgumentError("dimension mismatch", first=first.dim, second=second.dim)
    grid = np.unique(np.vstack([first.grid, second.grid]).round(15), axis=0)
    value, _ = quad_vec(
        lambda tau: np.max(np.abs(first.support(tau, grid) - second.support(tau, grid))),
        t0,
        t1,
        epsabs=settings.quad_epsabs,
        epsrel=1e-8,
        limit=settings.quad_limit,
    )
    return float(value)


def ac_selection(
    path: SetValuedPath,
    t0: float,
    c,
    t_end: Optional[float] = None,
    initial: Optional[ConvexBody] = None,
    k0: Optional[int] = None,
) -> Trajectory:
    """
    Absolutely continuous selection f of C0 + int_{t0}^s F with f(t0) = c

    The window is cut into k cells; each cell contributes the Chebyshev
    center of its own integral body, and the partial sums form f at the
    cell nodes. k doubles until two refinements agree on the coarse nodes.

    Args:
        path: Set-valued right-hand side F
        t0: Start time
        c: Start point, must lie in the initial body
        t_end: End of the window (defaults to the path domain end)
        initial: Initial body C0 (defaults to {c})
        k0: Initial number of cells
    """
    constants = numerics("setcalc")
    c = _point_array(c)
    t_end = path.t1 if t_end is None else float(t_end)
    if c.size != path.dim:
        raise InvalidArgumentError("start point dimension mismatch", expected=path.dim, got=c.size)
    if initial is not None and not initial.contains(c):
        raise InvalidArgumentError(
            "start point outside the initial body", point=c.tolist(), excess=initial.violation(c)
        )
    if t_end <= t0:
        raise InvalidArgumentError("selection window must be non-degenerate", t0=t0, t_end=t_end)

    k = int(k0 or constants["selection_k0"])
    tol = float(constants["selection_tol"])
    previous: Optional[np.ndarray] = None
    gaps = []
    converged = False
    for level in range(int(constants["selection_max_levels"])):
        nodes = np.linspace(t0, t_end, k + 1)
        steps = np.vstack([setvalued_integral(path, a, b).chebyshev_center() for a, b in zip(nodes[:-1], nodes[1:])])
        states = np.vstack([c, c + np.cumsum(steps, axis=0)])
        if previous is not None:
            gap = float(np.max(np.linalg.norm(states[::2] - previous, axis=1)))
            gaps.append(gap)
            log.debug(f"Selection refinement k={k}: gap {gap:.3e}")
            if gap < tol:
                converged = True
                break
        previous = states
        k *= 2

    if not converged:
        log.warning(f"Selection did not stabilize below {tol:g} after {len(gaps)} refinements")

    velocities = np.vstack([steps / np.diff(nodes)[:, None], steps[-1:] / (nodes[-1] - nodes[-2])])
    return Trajectory(
        times=nodes,
        states=states,
        velocities=velocities,
        meta={
            "solver": "ac-selection",
            "cells": int(nodes.size - 1),
            "gaps": gaps,
            "converged": converged,
            "tolerance": tol,
        },
    )
