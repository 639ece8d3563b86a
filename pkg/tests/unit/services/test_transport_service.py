"""
Test measure transport, coefficient-measure products and the resolvent
"""

import numpy as np
import pytest
from scipy.special import erfc

from nsflow.core.exceptions import InvalidArgumentError, RefusedError
from nsflow.models.coefficient import Coefficient
from nsflow.models.measure import MeasurePath, MeasureState, ProductKind, TestFunctionBank
from nsflow.schemas.problem import CoefficientSpec
from nsflow.services.flow_service import build_flow
from nsflow.services.transport_service import (
    MeasureTransport,
    Resolvent,
    bouchut_james_product,
    poupaud_rascle_product,
    product_state,
    pushforward,
    resolvent_apply,
    weak_residual,
)

DOMAIN = {"t": (0.0, 2.0), "x": [(-3.0, 3.0)]}


@pytest.fixture(scope="module")
def unit_speed():
    return Coefficient.from_formula("1", domain=DOMAIN)


@pytest.fixture(scope="module")
def compressive():
    coefficient = Coefficient.from_formula("-sign(x)", domain=DOMAIN)
    return coefficient, build_flow(coefficient, "forward", 0.0, 2.0, semigroup=False)


@pytest.fixture(scope="module")
def inner_bank():
    """Supports inside the region where the translated unit density equals 1"""
    return TestFunctionBank.default((0.1, 0.9), (0.0, 1.0), size=6)


def test_atoms_follow_characteristics(compressive):
    coefficient, flow = compressive
    state = pushforward(MeasureState(atoms=[[-1.0, 1.0], [2.0, 0.5]]), flow, 0.5, coefficient)
    np.testing.assert_allclose(state.atoms, [[-0.5, 1.0], [1.5, 0.5]], atol=1e-7)


def test_collapsing_density_forms_an_atom(compressive):
    coefficient, flow = compressive
    state = pushforward(MeasureState.lebesgue(-1.0, 1.0), flow, 0.5, coefficient, grid=41)
    assert state.atom_near(0.0, tol=1e-6) == pytest.approx(1.0, abs=1e-5)
    assert state.total_mass == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(state.density_at([-0.25, 0.25]), [1.0, 1.0], atol=1e-5)
    assert state.density_mass(-0.5, -1e-3) == pytest.approx(0.5 - 1e-3, abs=1e-5)


def test_density_follows_the_change_of_variables():
    """x' = -x^2 gives chi = x / (1 + t x); u0 = 1 + x on [0, 1] becomes 1 / (1 - y)^3 on [0, 1/2] at t = 1"""
    coefficient = Coefficient.from_formula("-x^2", domain=DOMAIN)
    flow = build_flow(coefficient, "forward", 0.0, 1.0, semigroup=False)
    u0 = MeasureState(breaks=[0.0, 1.0], coeffs=[[1.0, 1.0]])
    state = pushforward(u0, flow, 1.0, coefficient, grid=41)
    y = np.array([0.05, 0.2, 0.33, 0.45])
    np.testing.assert_allclose(state.density_at(y), (1.0 - y) ** -3, rtol=1e-4)
    assert state.atoms.shape[0] == 0
    assert state.total_mass == pytest.approx(1.5, abs=1e-8)


def test_full_collapse(compressive):
    coefficient, flow = compressive
    state = pushforward(MeasureState.lebesgue(-1.0, 1.0), flow, 1.5, coefficient, grid=21)
    assert state.atom_near(0.0, tol=1e-6) == pytest.approx(2.0, abs=1e-5)
    assert state.density_mass() == pytest.approx(0.0, abs=1e-5)


def test_anchor_time_is_identity(compressive):
    coefficient, flow = compressive
    u0 = MeasureState.dirac(0.3)
    assert MeasureTransport(coefficient, flow).pushforward(u0, 0.0) is u0


def test_transport_needs_forward_unique_flow(plus_sign):
    expansive = build_flow(plus_sign, "forward", 0.0, 1.0, override=True, semigroup=False)
    with pytest.raises(RefusedError):
        MeasureTransport(plus_sign, expansive)
    backward = build_flow(plus_sign, "backward", 1.0, 0.0, semigroup=False)
    with pytest.raises(InvalidArgumentError):
        MeasureTransport(plus_sign, backward)


def test_poupaud_rascle_product_of_smooth_transport(unit_speed, inner_bank):
    flow = build_flow(unit_speed, "forward", 0.0, 2.0, semigroup=False)
    table = poupaud_rascle_product(unit_speed, MeasureState.lebesgue(-1.0, 1.0), flow, inner_bank, reference=unit_speed)
    assert table.product == ProductKind.POUPAUD_RASCLE.value
    assert len(table.rows) == len(inner_bank)
    assert table.max_difference < 1e-4
    assert all(abs(row.product) > 1e-3 for row in table.rows if row.index % 3 == 0)


def test_poupaud_rascle_residual(unit_speed, inner_bank):
    flow = build_flow(unit_speed, "forward", 0.0, 2.0, semigroup=False)
    u0 = MeasureState.lebesgue(-1.0, 1.0)
    report = weak_residual(MeasurePath.constant(MeasureState()), unit_speed, "poupaud-rascle", inner_bank, flow, u0)
    assert report.max_residual < 1e-4
    with pytest.raises(InvalidArgumentError):
        weak_residual(MeasurePath.constant(MeasureState()), unit_speed, "poupaud-rascle", inner_bank)


def test_model_product_residual_of_translated_density(unit_speed, inner_bank):
    path = MeasurePath(lambda t: MeasureState.lebesgue(-1.0 + t, 1.0 + t))
    report = weak_residual(path, unit_speed, ProductKind.MODEL, inner_bank)
    assert report.product == "model"
    assert report.max_residual < 1e-5


def test_pointwise_products(heaviside):
    state = MeasureState(atoms=[[0.0, 1.0], [-1.0, 1.0]], breaks=[-1.0, 1.0], coeffs=[[1.0]])
    model = product_state(heaviside, state, 0.5, "model")
    assert model.atom_near(0.0) == pytest.approx(1.0)
    assert model.atom_near(-1.0) == pytest.approx(2.0)
    assert model.density_mass() == pytest.approx(2.0)
    with pytest.raises(InvalidArgumentError):
        product_state(heaviside, state, 0.5, ProductKind.BOUCHUT_JAMES)
    with pytest.raises(InvalidArgumentError):
        product_state(heaviside, state, 0.5, ProductKind.POUPAUD_RASCLE)


def test_bouchut_james_uses_declared_value():
    spec = CoefficientSpec(
        dim=1,
        pieces=[{"formula": "2*H(-x)"}],
        surfaces=[{"expr": "x", "minus": "2", "plus": "0", "value": "0"}],
        domain=DOMAIN,
    )
    product = product_state(Coefficient.from_spec(spec), MeasureState.dirac(0.0, 3.0), 0.5, "bouchut-james")
    assert product.atom_near(0.0) == pytest.approx(0.0)


def test_bouchut_james_path_follows_the_atom():
    """Atom riding x = t/2 on the jump of a, multiplied by the declared curve value 1/2"""
    spec = CoefficientSpec(
        dim=1,
        pieces=[{"formula": "H(t/2 - x)"}],
        surfaces=[{"expr": "x - t/2", "minus": "1", "plus": "0", "value": "1/2"}],
        domain=DOMAIN,
    )
    path = MeasurePath(lambda t: MeasureState(atoms=[[0.5 * t, 2.0]], breaks=[-1.0, 1.0], coeffs=[[1.0]]))
    product = bouchut_james_product(Coefficient.from_spec(spec), path)
    assert product.name == "bouchut-james"
    state = product.at(1.0)
    assert state.atom_near(0.5) == pytest.approx(1.0)
    assert state.density_mass() == pytest.approx(1.5)


def test_resolvent_of_unit_speed(unit_speed):
    """R(mu) f(x) = int_0^inf exp(-mu z) f(x - z) dz with a closed form for Gaussian f"""
    mu = 1.5
    xs = np.array([-1.0, 0.0, 0.5, 2.0])
    values = resolvent_apply(unit_speed, mu, lambda x: np.exp(-(x**2)), xs)
    expected = 0.5 * np.sqrt(np.pi) * np.exp(mu**2 / 4.0 - mu * xs) * erfc(mu / 2.0 - xs)
    np.testing.assert_allclose(values.real, expected, atol=1e-9)
    np.testing.assert_allclose(values.imag, 0.0, atol=1e-12)


def test_resolvent_residual_for_variable_speed():
    coefficient = Coefficient.from_formula("1.5 + 0.5*sin(x)", domain={"t": (0.0, 1.0), "x": [(-20.0, 20.0)]})
    resolvent = Resolvent(coefficient, 1.0 + 2.0j)
    assert resolvent.c0 == pytest.approx(1.0, abs=1e-5)
    assert resolvent.c1 == pytest.approx(2.0, abs=1e-5)
    assert resolvent.residual(lambda x: np.exp(-(x**2)), np.linspace(-1.0, 1.0, 5)) < 1e-6


@pytest.mark.parametrize(
    "formula,mu",
    [("1", 0.0), ("1", -1.0 + 1.0j), ("x", 1.0), ("1 + t", 1.0)],
)
def test_resolvent_preconditions(formula, mu):
    with pytest.raises(InvalidArgumentError):
        Resolvent(Coefficient.from_formula(formula, domain=DOMAIN), mu)
