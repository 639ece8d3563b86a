"""
Quadrature helpers built on Gauss-Legendre panels
"""

from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]"""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_rule(breaks: Sequence[float], order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss rule over consecutive panels

    Args:
        breaks: Increasing panel boundaries
        order: Nodes per panel

    Returns:
        (nodes, weights) flattened over all panels
    """
    breaks = np.asarray(breaks, dtype=float)
    if breaks.size < 2:
        return np.zeros(0), np.zeros(0)
    x, w = gauss_legendre(order)
    left, right = breaks[:-1], breaks[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def split_breaks(a: float, b: float, cuts: Sequence[float], max_width: float) -> np.ndarray:
    """Panel boundaries on [a, b] honoring interior cuts and a maximum panel width"""
    inner = [c for c in cuts if a < c < b]
    edges = np.unique(np.concatenate([[a, b], inner]))
    out = [edges[0]]
    for left, right in zip(edges[:-1], edges[1:]):
        pieces = max(1, int(np.ceil((right - left) / max_width)))
        out.extend(np.linspace(left, right, pieces + 1)[1:])
    return np.asarray(out)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log|y| against log x"""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    mask = (x > 0) & (y > 0)
    if mask.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(slope)
