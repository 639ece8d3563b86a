"""
Test piecewise coefficients and the essential convex hull
"""

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.models.coefficient import Coefficient, EssentialHull
from nsflow.schemas.problem import CoefficientSpec

UNIT = np.array([[1.0], [-1.0]])


def test_pointwise_values(minus_sign):
    values = minus_sign(0.0, np.array([[-1.0], [0.5]]))
    np.testing.assert_allclose(values[:, 0], [1.0, -1.0])


def test_surface_value_is_mean_of_limits(minus_sign):
    """Without a declared value the coefficient takes the mean on the surface"""
    assert minus_sign(0.3, np.array([[0.0]]))[0, 0] == pytest.approx(0.0)
    limits = minus_sign.limits(0.3, [0.0])
    np.testing.assert_allclose(np.vstack(limits)[:, 0], [1.0, -1.0])


def test_declared_surface_value():
    spec = CoefficientSpec(
        dim=1,
        pieces=[
            {"region": [{"expr": "x - t/2", "op": "<"}], "formula": "1"},
            {"region": [{"expr": "x - t/2", "op": ">="}], "formula": "0"},
        ],
        surfaces=[{"expr": "x - t/2", "minus": "1", "plus": "0", "value": "1/4"}],
        domain={"t": (0.0, 1.0), "x": [(-2.0, 2.0)]},
    )
    coefficient = Coefficient.from_spec(spec)
    assert coefficient(1.0, np.array([[0.5]]))[0, 0] == pytest.approx(0.25)
    assert coefficient.model_value(1.0, [0.5])[0] == pytest.approx(0.5)
    assert coefficient.surface_positions(1.0, -2.0, 2.0) == pytest.approx([0.5])


def test_essential_support_examples(plus_sign, heaviside, smooth):
    np.testing.assert_allclose(plus_sign.essential_support(0.0, np.array([[0.0]]), UNIT)[0], [1.0, 1.0])
    np.testing.assert_allclose(heaviside.essential_support(0.0, np.array([[0.0]]), UNIT)[0], [2.0, 0.0])
    x = np.array([[0.7]])
    a = smooth(0.0, x)[0, 0]
    np.testing.assert_allclose(smooth.essential_support(0.0, x, UNIT)[0], [a, -a])


def test_hull_dominates_one_sided_limits(heaviside):
    """Upper semi-continuity along the surface"""
    support_on = heaviside.essential_support(0.0, np.array([[0.0]]), UNIT)[0]
    for side in (-1e-6, 1e-6):
        near = heaviside.essential_support(0.0, np.array([[side]]), UNIT)[0]
        assert np.all(support_on >= near - 1e-12)


def test_hull_body(plus_sign):
    body = EssentialHull(plus_sign).body(0.0, [0.0])
    np.testing.assert_allclose(body.support_at(UNIT), [1.0, 1.0])
    assert EssentialHull(plus_sign).body(0.0, [1.0]).kind == "point"


def test_two_dimensional_corner():
    """Four cells meet at the origin"""
    coefficient = Coefficient.from_formula(["-sign(x)", "-sign(y)"])
    limits = np.vstack(coefficient.limits(0.0, [0.0, 0.0]))
    assert limits.shape == (4, 2)
    body = EssentialHull(coefficient).body(0.0, [0.0, 0.0])
    assert body.contains([0.0, 0.0])
    assert body.support_at(np.array([[1.0, 1.0]]))[0] == pytest.approx(np.sqrt(2.0))


def test_divergence_per_piece():
    coefficient = Coefficient.from_formula(["x^2", "x*y"])
    np.testing.assert_allclose(coefficient.divergence(0.0, np.array([[1.0, 2.0]])), [2.0 + 1.0])


def test_bounds(minus_sign):
    declared = Coefficient.from_formula("t*sign(x)", bound="t")
    assert float(declared.bound(0.5)) == pytest.approx(0.5)
    assert declared.bound_integral(0.0, 2.0) == pytest.approx(2.0)
    assert float(minus_sign.bound(0.0)) == pytest.approx(1.05)


def test_bound_must_depend_on_time_only():
    with pytest.raises(InvalidArgumentError):
        Coefficient.from_formula("x", bound="abs(x)")


def test_time_breaks():
    coefficient = Coefficient.from_formula("H(t - 1)", domain={"t": (0.0, 2.0), "x": [(-1.0, 1.0)]})
    assert not coefficient.has_x_surfaces
    assert coefficient.time_breaks(0.0, 2.0) == pytest.approx([1.0])
    assert coefficient.time_breaks(1.5, 2.0) == []


def test_time_reversed():
    coefficient = Coefficient.from_formula("t*x + sign(x)")
    reversed_coefficient = coefficient.time_reversed()
    value = reversed_coefficient(1.0, np.array([[2.0]]))[0, 0]
    assert value == pytest.approx(-(-1.0 * 2.0 + 1.0))
    assert reversed_coefficient.t_range == (-2.0, 0.0)


def test_uncovered_point_rejected():
    coefficient = Coefficient.from_spec(
        CoefficientSpec(dim=1, pieces=[{"region": [{"expr": "x", "op": "<"}], "formula": "1"}])
    )
    with pytest.raises(InvalidArgumentError):
        coefficient(0.0, np.array([[1.0]]))


def test_dimension_mismatch_rejected(minus_sign):
    with pytest.raises(InvalidArgumentError):
        minus_sign(0.0, np.zeros((3, 2)))


def test_spec_rejects_component_mismatch():
    with pytest.raises(ValueError):
        CoefficientSpec(dim=2, pieces=[{"formula": ["x"]}])
