"""
Randomized properties of essential supports and generalized-graph supports
"""

import numpy as np
import pytest

from nsflow.models.coefficient import Coefficient
from nsflow.models.family import EpsFamily
from nsflow.services.generalized_graph import GeneralizedGraph

pytestmark = pytest.mark.property

CASES = 200
PLANE = {"t": (0.0, 2.0), "x": [(-3.0, 3.0), (-3.0, 3.0)]}


@pytest.fixture(scope="module")
def crossing():
    """Two discontinuity lines x1 = 0 and x2 = 0 meeting at the origin"""
    return Coefficient.from_formula(["-sign(x1) + 0.3*x2", "-sign(x2) + 0.1*t"], domain=PLANE)


def _points(rng, count):
    """Mix of generic points, points on either line and the corner"""
    X = rng.uniform(-2.0, 2.0, size=(count, 2))
    kind = rng.integers(0, 4, size=count)
    X[kind == 1, 0] = 0.0
    X[kind == 2, 1] = 0.0
    X[kind == 3] = 0.0
    return X


def test_essential_support_is_positively_homogeneous(crossing, rng):
    X = _points(rng, CASES)
    W = rng.normal(size=(6, 2))
    scale = rng.uniform(0.1, 10.0)
    t = float(rng.uniform(0.0, 2.0))
    np.testing.assert_allclose(
        crossing.essential_support(t, X, scale * W), scale * crossing.essential_support(t, X, W), rtol=1e-12, atol=1e-12
    )


def test_essential_support_is_subadditive(crossing, rng):
    X = _points(rng, CASES)
    for x in X:
        w1, w2 = rng.normal(size=(2, 2))
        h = crossing.essential_support(0.5, x[None, :], np.array([w1, w2, w1 + w2]))[0]
        assert h[2] <= h[0] + h[1] + 1e-12


def test_essential_hull_is_nonempty(crossing, rng):
    X = _points(rng, CASES)
    W = rng.normal(size=(8, 2))
    H = crossing.essential_support(1.0, X, np.vstack([W, -W]))
    assert np.all(H[:, :8] + H[:, 8:] >= -1e-12)


def test_essential_support_off_surfaces_is_linear(crossing, rng):
    X = rng.uniform(0.1, 2.0, size=(CASES, 2)) * rng.choice([-1.0, 1.0], size=(CASES, 2))
    W = rng.normal(size=(4, 2))
    np.testing.assert_allclose(crossing.essential_support(0.3, X, W), crossing(0.3, X) @ W.T, atol=1e-12)


@pytest.fixture(scope="module")
def tanh_graph():
    family = EpsFamily.from_expressions("tanh(x/eps)", natural=True)
    return GeneralizedGraph(family, deltas=[2.0**-6, 2.0**-8, 2.0**-10])


def test_graph_support_contains_finest_values(tanh_graph, rng):
    finest = float(tanh_graph.family.eps_grid[-1])
    for x in rng.uniform(-1.5, 1.5, size=CASES):
        up, down = tanh_graph.support_many(x, np.array([[1.0], [-1.0]]))
        value = np.tanh(x / finest)
        assert value <= up + 1e-12
        assert -value <= down + 1e-12
        assert up + down >= 0.0
        assert -1.0 - 1e-12 <= -down <= up <= 1.0 + 1e-12
