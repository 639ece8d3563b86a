"""
Test convex bodies and set-valued paths
"""

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.models.convex import ConvexBody, SetValuedPath
from nsflow.utils.grids import direction_grid


def test_exact_body_off_grid_support():
    """Generator bodies answer any direction exactly"""
    body = ConvexBody.from_generators(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    w = np.array([[1.0, 1.0]])
    assert body.support_at(w)[0] == pytest.approx(1.0 / np.sqrt(2.0))


def test_sampled_body_outer_bound():
    """Off-grid directions of a sampled square use the polyhedral outer bound"""
    grid = direction_grid(2, 4)
    body = ConvexBody.sampled(grid, np.ones(4))
    value = body.support_at(np.array([[1.0, 1.0]]))[0]
    assert value == pytest.approx(np.sqrt(2.0), rel=1e-7)


def test_sampled_rejects_length_mismatch():
    with pytest.raises(InvalidArgumentError):
        ConvexBody.sampled(direction_grid(2, 8), np.ones(3))


def test_membership_and_violation():
    body = ConvexBody.from_generators(np.array([[0.0], [2.0]]), kind="interval-product")
    assert body.contains([1.0])
    assert body.contains([2.0 + 1e-9])
    assert not body.contains([2.1])
    assert body.violation([2.5]) == pytest.approx(0.5)
    assert body.violation([1.0]) == 0.0


def test_chebyshev_center_of_square():
    body = ConvexBody.from_generators(np.array([[0, 0], [2, 0], [0, 2], [2, 2]], dtype=float))
    np.testing.assert_allclose(body.chebyshev_center(), [1.0, 1.0], atol=1e-6)


def test_consistency_detects_bad_values():
    grid = direction_grid(2, 8)
    good = ConvexBody.sampled(grid, np.ones(8))
    assert good.is_consistent()
    bad_values = np.ones(8)
    bad_values[2] = 5.0
    assert not ConvexBody.sampled(grid, bad_values).is_consistent()
    assert not ConvexBody.sampled(direction_grid(1), np.array([-1.0, -1.0])).is_consistent()


def test_unbounded_body_flags():
    body = ConvexBody.sampled(direction_grid(1), np.array([np.inf, 0.0]))
    assert not body.bounded
    assert body.is_consistent()


def test_json_round_trip_shape():
    body = ConvexBody.from_generators(np.array([[1.0, 2.0]]), radius=0.5, kind="ball")
    payload = body.to_json()
    assert set(payload) == {"dim", "kind", "grid", "support"}
    again = ConvexBody.from_json(payload)
    np.testing.assert_allclose(again.support, body.support)
    assert again.dim == 2 and again.kind == "ball"


def test_constant_path_bound():
    body = ConvexBody.from_generators(np.array([[-1.0], [1.0]]))
    path = SetValuedPath.constant(body, 0.0, 2.0)
    assert path.covers(0.5, 1.5)
    assert not path.covers(-0.5, 1.0)
    assert path.bound_violations([0.0, 1.0, 2.0]) == []
    np.testing.assert_allclose(path.body_at(1.0).support, [1.0, 1.0])
