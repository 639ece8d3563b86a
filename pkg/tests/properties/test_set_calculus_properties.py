"""
Randomized properties of the support-function set calculus
"""

import numpy as np
import pytest

from nsflow.models.convex import SetValuedPath
from nsflow.services.set_calculus import (
    convex_hull_of_samples,
    hausdorff_distance,
    make_ball,
    minkowski_sum,
    setvalued_integral,
)
from nsflow.utils.grids import direction_grid

pytestmark = pytest.mark.property

CASES = 200


def _random_body(rng):
    if rng.random() < 0.25:
        return make_ball(rng.normal(size=2), float(rng.uniform(0.0, 1.5)))
    return convex_hull_of_samples(rng.normal(size=(int(rng.integers(1, 8)), 2)))


def test_hausdorff_metric_axioms(rng):
    for _ in range(CASES):
        A, B, C = (_random_body(rng) for _ in range(3))
        assert hausdorff_distance(A, A) == pytest.approx(0.0, abs=1e-12)
        assert hausdorff_distance(A, B) >= 0.0
        assert hausdorff_distance(A, B) == pytest.approx(hausdorff_distance(B, A), abs=1e-12)
        assert hausdorff_distance(A, C) <= hausdorff_distance(A, B) + hausdorff_distance(B, C) + 1e-12


def test_translation_distance(rng):
    gap = np.cos(np.pi / direction_grid(2).shape[0])
    for _ in range(CASES):
        A = _random_body(rng)
        v = rng.normal(size=2)
        moved = minkowski_sum(A, convex_hull_of_samples(v[None, :]))
        d = hausdorff_distance(A, moved)
        assert gap * np.linalg.norm(v) - 1e-12 <= d <= np.linalg.norm(v) + 1e-12


def test_support_is_sublinear(rng):
    for _ in range(CASES):
        A = _random_body(rng)
        w1, w2 = rng.normal(size=(2, 2))
        h1, h2, h12 = A.support_at(np.array([w1, w2, w1 + w2]))
        n1, n2, n12 = (np.linalg.norm(w) for w in (w1, w2, w1 + w2))
        assert n12 * h12 <= n1 * h1 + n2 * h2 + 1e-10
        assert A.support_at(3.0 * w1[None, :])[0] == pytest.approx(h1)


def test_minkowski_supports_add(rng):
    for _ in range(CASES):
        A, B = _random_body(rng), _random_body(rng)
        W = rng.normal(size=(5, 2))
        np.testing.assert_allclose(minkowski_sum(A, B).support_at(W), A.support_at(W) + B.support_at(W), atol=1e-10)


def _rotating_ball_path() -> SetValuedPath:
    """F_tau = ball of radius 1 + tau around (cos tau, sin tau)"""

    def support_fn(tau, W):
        return W @ np.array([np.cos(tau), np.sin(tau)]) + (1.0 + tau)

    grid = direction_grid(2, 64)
    return SetValuedPath(dim=2, t0=0.0, t1=2.0, support_fn=support_fn, bound=lambda tau: 2.0 + tau, grid=grid)


def test_integral_closed_form_and_additivity(rng):
    path = _rotating_ball_path()
    W = path.grid
    for _ in range(CASES):
        t, s, r = np.sort(rng.uniform(0.0, 2.0, size=3))
        whole = setvalued_integral(path, t, r).support
        first = setvalued_integral(path, t, s).support
        second = setvalued_integral(path, s, r).support
        np.testing.assert_allclose(first + second, whole, atol=1e-9)
        shift = np.array([np.sin(r) - np.sin(t), np.cos(t) - np.cos(r)])
        growth = (r - t) + 0.5 * (r**2 - t**2)
        np.testing.assert_allclose(whole, W @ shift + growth, atol=1e-9)
        backwards = setvalued_integral(path, r, t).support
        np.testing.assert_allclose(backwards, -(W @ shift) + growth, atol=1e-9)
