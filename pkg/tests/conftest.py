"""
Test configuration and fixtures
"""

from pathlib import Path

import numpy as np
import pytest

from nsflow.core.logging import setup_logging
from nsflow.models.coefficient import Coefficient
from nsflow.schemas.problem import SamplingPlan

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "configs" / "problems"

DOMAIN = {"t": (0.0, 2.0), "x": [(-3.0, 3.0)]}


@pytest.fixture(scope="session", autouse=True)
def quiet_logging():
    """Keep solver logs out of the test output"""
    setup_logging("WARNING", "text")


@pytest.fixture
def rng():
    """Seeded generator for randomized checks"""
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def problems_dir() -> Path:
    return PROBLEMS_DIR


@pytest.fixture(scope="session")
def minus_sign() -> Coefficient:
    """a(x) = -sign(x): compressive jump at the origin"""
    return Coefficient.from_formula("-sign(x)", domain=DOMAIN)


@pytest.fixture(scope="session")
def plus_sign() -> Coefficient:
    """a(x) = sign(x): expansive jump at the origin"""
    return Coefficient.from_formula("sign(x)", domain=DOMAIN)


@pytest.fixture(scope="session")
def heaviside() -> Coefficient:
    """a(x) = 2 H(-x): downward jump"""
    return Coefficient.from_formula("2*H(-x)", domain=DOMAIN)


@pytest.fixture(scope="session")
def smooth() -> Coefficient:
    """Smooth bounded coefficient with 0.2 <= a <= 0.8"""
    return Coefficient.from_formula("0.5 + 0.3*sin(x)", domain=DOMAIN)


@pytest.fixture
def small_plan() -> SamplingPlan:
    """Reduced sampling plan for fast condition checks"""
    return SamplingPlan(points=400, pairs=2000, seed=7)
