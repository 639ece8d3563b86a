"""
Direction and scale grids
"""

from typing import Optional

import numpy as np

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError


def direction_grid(dim: int, count: Optional[int] = None) -> np.ndarray:
    """
    Unit direction grid for support-function sampling

    Args:
        dim: Ambient dimension n
        count: Number of directions (ignored for n = 1)

    Returns:
        (m, n) array of unit vectors: {+1, -1} on the line, equally spaced
        angles in the plane, a Fibonacci sphere for n >= 3
    """
    if dim < 1:
        raise InvalidArgumentError("dimension must be positive", dim=dim)
    if dim == 1:
        return np.array([[1.0], [-1.0]])

    count = int(count or settings.direction_count)
    if dim == 2:
        angles = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])

    return fibonacci_sphere(dim, count)


def fibonacci_sphere(dim: int, count: int) -> np.ndarray:
    """Quasi-uniform points on S^{n-1}; exact Fibonacci lattice for n = 3"""
    i = np.arange(count) + 0.5
    if dim == 3:
        golden = (1.0 + 5.0**0.5) / 2.0
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(np.clip(1.0 - z**2, 0.0, None))
        phi = 2.0 * np.pi * i / golden
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])

    # Higher dimensions: Kronecker sequence pushed through the Gaussian quantile
    from scipy.special import ndtri

    primes = np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37][:dim], dtype=float)
    frac = np.mod(np.outer(i, np.sqrt(primes)), 1.0)
    points = ndtri(np.clip(frac, 1e-12, 1 - 1e-12))
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def normalize(w: np.ndarray) -> np.ndarray:
    """Normalize rows to unit length"""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidArgumentError("zero direction", rows=np.flatnonzero(norms[:, 0] == 0.0).tolist())
    return w / norms


def geometric_eps_grid(first_exponent: int = 1, last_exponent: int = 20, base: float = 2.0) -> np.ndarray:
    """Decreasing geometric grid eps_i = base^{-i}"""
    return base ** -np.arange(first_exponent, last_exponent + 1, dtype=float)


def delta_schedule(first_exponent: int = 3, last_exponent: int = 12) -> np.ndarray:
    """Decreasing radii delta_j = 2^{-j}"""
    return 2.0 ** -np.arange(first_exponent, last_exponent + 1, dtype=float)


def ball_grid(center: np.ndarray, radius: float, points_per_axis: int) -> np.ndarray:
    """Tensor grid of the cube around center, filtered to the closed ball"""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    offsets = np.linspace(-radius, radius, points_per_axis)
    mesh = np.meshgrid(*([offsets] * center.size), indexing="ij")
    cloud = np.column_stack([m.ravel() for m in mesh])
    cloud = cloud[np.linalg.norm(cloud, axis=1) <= radius * (1.0 + 1e-12)]
    return center[None, :] + cloud
