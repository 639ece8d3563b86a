"""
Test eps-families and mollified fields
"""

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.models.family import EpsFamily, MollifiedField
from nsflow.models.trajectory import Trajectory
from nsflow.schemas.problem import MollifierSpec

GRID = [2.0**-k for k in range(3, 8)]


@pytest.mark.parametrize("grid", [[], [0.5, 0.5], [0.25, 0.5], [2.0, 0.5], [0.5, 0.0]])
def test_eps_grid_validation(grid):
    with pytest.raises(InvalidArgumentError):
        EpsFamily(grid, lambda eps, X: X)


def test_formula_family_values():
    family = EpsFamily.from_expressions("x/eps", eps_grid=GRID)
    np.testing.assert_allclose(family.value_at(0.25, [1.0, 2.0])[:, 0], [4.0, 8.0])
    assert family.dim_out == 1


def test_vector_family_point_shape():
    family = EpsFamily.from_expressions(["x + y", "eps*y"], dim_in=2, eps_grid=GRID)
    values = family.value_at(0.125, [1.0, 2.0])
    assert values.shape == (1, 2)
    np.testing.assert_allclose(values[0], [3.0, 0.25])


def test_composition():
    outer = EpsFamily.from_expressions("x^2", eps_grid=GRID)
    inner = EpsFamily.from_expressions("x + eps", eps_grid=GRID[1:])
    composed = outer.composed(inner)
    np.testing.assert_allclose(composed.eps_grid, GRID[1:])
    assert composed.value_at(GRID[1], [1.0])[0, 0] == pytest.approx((1.0 + GRID[1]) ** 2)


def test_composition_dimension_mismatch():
    outer = EpsFamily.from_expressions("x", eps_grid=GRID)
    inner = EpsFamily.from_expressions(["x", "y"], dim_in=2, eps_grid=GRID)
    with pytest.raises(InvalidArgumentError):
        outer.composed(inner)


def test_cbound_violations():
    family = EpsFamily(GRID, lambda eps, X: X / eps, cbound={((0.0, 1.0),): ((0.0, 10.0),)})
    bad = family.cbound_violations(samples=200)
    assert bad and all(entry["eps"] <= 2.0**-4 for entry in bad)


def test_trajectory_family():
    trajectories = {
        eps: Trajectory(times=[0.0, 1.0], states=[0.0, eps], velocities=[eps, eps]) for eps in (0.5, 0.25)
    }
    family = EpsFamily.from_trajectories(trajectories)
    np.testing.assert_allclose(family.eps_grid, [0.5, 0.25])
    assert family.value_at(0.25, [0.5])[0, 0] == pytest.approx(0.125)


def test_mollified_sign_is_odd_and_smooth(minus_sign):
    field = MollifiedField(minus_sign, MollifierSpec(kind="bump"))
    x = np.array([-0.02, -0.005, 0.0, 0.005, 0.02, 0.5])
    values = field(0.01, 0.0, x)[:, 0]
    np.testing.assert_allclose(values[[0, 1]], -values[[4, 3]], atol=1e-9)
    assert values[2] == pytest.approx(0.0, abs=1e-9)
    assert values[0] == pytest.approx(1.0, abs=1e-5)
    assert values[-1] == pytest.approx(-1.0, abs=1e-5)
    assert -1.0 < values[3] < 0.0


def test_mollified_log_scale_is_wider(minus_sign):
    """gamma_eps = 1/log(1/eps) spreads the transition far beyond eps"""
    narrow = MollifiedField(minus_sign, MollifierSpec(kind="bump", scale="identity"))
    wide = MollifiedField(minus_sign, MollifierSpec(kind="bump", scale="log"))
    x = np.array([0.05])
    assert narrow(2.0**-8, 0.0, x)[0, 0] == pytest.approx(-1.0, abs=1e-5)
    assert wide(2.0**-8, 0.0, x)[0, 0] > -0.9


def test_mollified_one_sided_samples_to_the_right(minus_sign):
    """The one-sided kernel reads a on [x, x + gamma/2]: the transition sits left of the surface"""
    field = MollifiedField(minus_sign, MollifierSpec(kind="one-sided"))
    eps = 0.01
    x = np.array([0.0, 0.01, -eps / 4, -eps / 2 - 1e-6])
    values = field(eps, 0.0, x)[:, 0]
    np.testing.assert_allclose(values, [-1.0, -1.0, 0.0, 1.0], atol=1e-8)


def test_mollified_smooth_coefficient_converges(smooth):
    field = MollifiedField(smooth, MollifierSpec(kind="gaussian"))
    x = np.linspace(-1.0, 1.0, 5)
    exact = smooth(0.0, x[:, None])[:, 0]
    np.testing.assert_allclose(field(1e-4, 0.0, x)[:, 0], exact, atol=1e-5)


def test_mollified_two_dimensional():
    from nsflow.models.coefficient import Coefficient

    coefficient = Coefficient.from_formula(["-sign(x)", "0"])
    field = MollifiedField(coefficient, MollifierSpec(kind="bump"))
    values = field(0.01, 0.0, np.array([[0.5, 0.0], [0.0, 0.3]]))
    np.testing.assert_allclose(values[0], [-1.0, 0.0], atol=1e-5)
    assert values[1, 0] == pytest.approx(0.0, abs=1e-9)


def test_mollified_family(minus_sign):
    family = EpsFamily.mollified(MollifiedField(minus_sign, MollifierSpec(eps_exponents=(4, 6))))
    assert family.natural
    np.testing.assert_allclose(family.eps_grid, [2.0**-4, 2.0**-5, 2.0**-6])
