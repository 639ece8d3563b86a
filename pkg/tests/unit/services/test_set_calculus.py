"""
Test set calculus: constructors, Hausdorff distance, sums, integrals and selections
"""

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError, UnsupportedError
from nsflow.models.convex import ConvexBody, SetValuedPath
from nsflow.services.set_calculus import (
    ac_selection,
    convex_hull_of_samples,
    hausdorff_distance,
    make_ball,
    make_box,
    make_point,
    minkowski_sum,
    path_l1_distance,
    setvalued_integral,
)
from nsflow.utils.grids import direction_grid

E1 = np.array([[1.0, 0.0]])


def _interval(lo: float, hi: float) -> ConvexBody:
    return make_box([lo], [hi])


def test_ball_support():
    assert make_ball([0.0, 0.0], 1.0).support_at(E1)[0] == pytest.approx(1.0)
    assert make_ball([2.0, 0.0], 1.0).support_at(E1)[0] == pytest.approx(3.0)
    point = make_ball([2.0, -1.0], 0.0)
    assert point.kind == "point"
    assert point.support_at(np.array([[0.0, 1.0]]))[0] == pytest.approx(-1.0)


@pytest.mark.parametrize("radius", [-1.0, np.inf, np.nan])
def test_ball_rejects_bad_radius(radius):
    with pytest.raises(InvalidArgumentError):
        make_ball([0.0], radius)


def test_box_rejects_inverted_bounds():
    with pytest.raises(InvalidArgumentError):
        make_box([1.0], [0.0])


def test_hausdorff_examples():
    assert hausdorff_distance(_interval(0, 1), _interval(0, 2)) == pytest.approx(1.0)
    body = make_ball([0.5, 0.5], 2.0)
    assert hausdorff_distance(body, body) == 0.0
    assert hausdorff_distance(make_ball([0.0, 0.0], 1.0), make_point([0.0, 0.0])) == pytest.approx(1.0)


def test_hausdorff_errors():
    with pytest.raises(InvalidArgumentError):
        hausdorff_distance(_interval(0, 1), make_point([0.0, 0.0]))
    unbounded = ConvexBody.sampled(direction_grid(1), np.array([np.inf, 0.0]))
    with pytest.raises(UnsupportedError):
        hausdorff_distance(unbounded, _interval(0, 1))


def test_minkowski_examples():
    total = minkowski_sum(_interval(0, 1), _interval(0, 1))
    np.testing.assert_allclose(total.support_at(np.array([[1.0], [-1.0]])), [2.0, 0.0])
    assert total.kind == "interval-product"

    shifted = minkowski_sum(make_ball([0.0, 0.0], 1.0), make_point([1.0, 2.0]))
    w = direction_grid(2, 16)
    np.testing.assert_allclose(shifted.support_at(w), w @ [1.0, 2.0] + 1.0, atol=1e-12)

    body = make_box([0.0, -1.0], [1.0, 3.0])
    assert hausdorff_distance(minkowski_sum(body, make_point([0.0, 0.0])), body) < 1e-12


def test_minkowski_mixed_grids():
    """Sums with sampled bodies use the merged grid"""
    sampled = ConvexBody.sampled(direction_grid(2, 8), np.ones(8))
    total = minkowski_sum(sampled, make_point([1.0, 0.0]))
    assert total.kind == "sampled"
    assert total.support_at(E1)[0] == pytest.approx(2.0)


def test_hull_examples():
    segment = convex_hull_of_samples([-1.0, 1.0])
    np.testing.assert_allclose(segment.support_at(np.array([[1.0], [-1.0]])), [1.0, 1.0])

    triangle = convex_hull_of_samples([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.2, 0.2]])
    assert triangle.vertices.shape[0] == 3
    assert triangle.support_at(np.array([[1.0, 1.0]]))[0] == pytest.approx(1.0 / np.sqrt(2.0))

    single = convex_hull_of_samples([[3.0, 4.0]])
    assert single.kind == "point"
    with pytest.raises(InvalidArgumentError):
        convex_hull_of_samples(np.zeros((0, 2)))


def test_integral_of_constant_interval():
    path = SetValuedPath.constant(_interval(-1, 1), 0.0, 2.0)
    body = setvalued_integral(path, 0.0, 1.5)
    np.testing.assert_allclose(body.support, [1.5, 1.5], atol=1e-10)


def test_integral_of_point_and_orientation():
    c = np.array([1.0, -2.0])
    path = SetValuedPath.constant(make_point(c), 0.0, 1.0)
    forward = setvalued_integral(path, 0.0, 0.5)
    np.testing.assert_allclose(forward.chebyshev_center(), 0.5 * c, atol=1e-7)
    backward = setvalued_integral(path, 0.5, 0.0)
    np.testing.assert_allclose(backward.support, path.grid @ (-0.5 * c), atol=1e-10)


def test_integral_of_growing_interval():
    """F_tau = [0, tau] integrates to [0, 1/2]"""
    path = SetValuedPath.from_bodies(lambda tau: _interval(0.0, tau), 0.0, 1.0, bound=lambda tau: tau)
    body = setvalued_integral(path, 0.0, 1.0)
    np.testing.assert_allclose(body.support, [0.5, 0.0], atol=1e-10)


def test_integral_outside_domain():
    path = SetValuedPath.constant(_interval(-1, 1), 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        setvalued_integral(path, 0.0, 2.0)


def test_integral_additivity():
    path = SetValuedPath.from_bodies(
        lambda tau: make_ball([np.cos(tau), np.sin(tau)], 0.5 + tau), 0.0, 2.0, bound=lambda tau: 1.5 + tau
    )
    whole = setvalued_integral(path, 0.0, 2.0)
    split = minkowski_sum(setvalued_integral(path, 0.0, 0.7), setvalued_integral(path, 0.7, 2.0))
    assert hausdorff_distance(whole, split) < 1e-8


def test_path_distance():
    first = SetValuedPath.constant(_interval(0, 1), 0.0, 1.0)
    second = SetValuedPath.constant(_interval(0, 2), 0.0, 1.0)
    assert path_l1_distance(first, second, 0.0, 1.0) == pytest.approx(1.0)


def test_selection_single_valued():
    path = SetValuedPath.constant(make_point([1.0]), 0.0, 1.0)
    selection = ac_selection(path, 0.0, [0.0])
    s = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(selection.at(s)[:, 0], s, atol=1e-9)
    assert selection.meta["converged"]


def test_selection_stays_in_envelope():
    path = SetValuedPath.constant(_interval(-1, 1), 0.0, 1.0)
    selection = ac_selection(path, 0.0, [0.0])
    assert np.all(np.abs(selection.states[:, 0]) <= selection.times + 1e-9)


def test_selection_modulus():
    path = SetValuedPath.constant(_interval(0, 1), 0.0, 1.0)
    selection = ac_selection(path, 0.0, [0.0])
    assert selection.modulus_violations(lambda r, s: s - r) == []


def test_selection_membership_in_primitive():
    """f(s) lies in C0 + int_0^s F"""
    path = SetValuedPath.from_bodies(lambda tau: _interval(tau, 1.0 + tau), 0.0, 1.0, bound=lambda tau: 1.0 + tau)
    initial = _interval(-0.1, 0.1)
    selection = ac_selection(path, 0.0, [0.05], initial=initial)
    for s, state in zip(selection.times[1:], selection.states[1:]):
        assert minkowski_sum(initial, setvalued_integral(path, 0.0, float(s))).contains(state, tol=1e-6)


def test_selection_start_outside_initial():
    path = SetValuedPath.constant(_interval(0, 1), 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        ac_selection(path, 0.0, [2.0], initial=_interval(-1, 1))
