"""
Mollifier kernels and scale laws
"""

from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np
from scipy import integrate

GAUSSIAN_CUTOFF = 8.0


def _raw_bump(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def bump_moment(order: int) -> float:
    """Moment int z^k exp(-1/(1-z^2)) dz over (-1, 1)"""
    value, _ = integrate.quad(lambda z: z**order * float(_raw_bump(np.array(z))), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return value


def bump(z: np.ndarray) -> np.ndarray:
    """Positive C-infinity bump on (-1, 1) with unit mass"""
    return _raw_bump(z) / bump_moment(0)


def moment_vanishing(z: np.ndarray) -> np.ndarray:
    """(a + b z^2) times the bump: unit mass, vanishing first three moments, takes negative values"""
    m0, m2, m4 = bump_moment(0), bump_moment(2), bump_moment(4)
    a = 1.0 / (m0 - m2**2 / m4)
    b = -a * m2 / m4
    z = np.asarray(z, dtype=float)
    return (a + b * z**2) * _raw_bump(z)


def one_sided(z: np.ndarray) -> np.ndarray:
    """Unit-mass bump squeezed onto (-1/2, 0); A_eps(x) only samples a at points right of x"""
    return 4.0 * bump(4.0 * np.asarray(z, dtype=float) + 1.0)


def gaussian(z: np.ndarray) -> np.ndarray:
    """Standard Gaussian density"""
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z**2) / np.sqrt(2.0 * np.pi)


KERNELS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bump": bump,
    "moment-vanishing": moment_vanishing,
    "one-sided": one_sided,
    "gaussian": gaussian,
}

SUPPORTS: Dict[str, Tuple[float, float]] = {
    "bump": (-1.0, 1.0),
    "moment-vanishing": (-1.0, 1.0),
    "one-sided": (-0.5, 0.0),
    "gaussian": (-GAUSSIAN_CUTOFF, GAUSSIAN_CUTOFF),
}


def identity_scale(eps: float) -> float:
    return float(eps)


def log_scale(eps: float) -> float:
    """gamma_eps = 1 / log(1/eps)"""
    return float(1.0 / np.log(1.0 / eps))


SCALE_LAWS: Dict[str, Callable[[float], float]] = {"identity": identity_scale, "log": log_scale}


def l2_normalized_bump(z: np.ndarray) -> np.ndarray:
    """Symmetric bump with unit L2 norm"""
    return _raw_bump(z) / np.sqrt(_bump_square_mass())


@lru_cache(maxsize=None)
def _bump_square_mass() -> float:
    value, _ = integrate.quad(lambda z: float(_raw_bump(np.array(z))) ** 2, -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return value


def l2_normalized_bump_derivative(z: np.ndarray) -> np.ndarray:
    """Derivative of l2_normalized_bump"""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = -2.0 * zi / (1.0 - zi**2) ** 2 * np.exp(-1.0 / (1.0 - zi**2))
    return out / np.sqrt(_bump_square_mass())
