"""
Test oscillatory integrals, wavefront estimates and characteristic pullbacks
"""

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError, RefusedError
from nsflow.models.coefficient import Coefficient
from nsflow.models.family import EpsFamily, MollifiedField
from nsflow.models.microlocal import PhaseProblem
from nsflow.schemas.problem import MollifierSpec
from nsflow.schemas.reports import WavefrontEstimate
from nsflow.services.microlocal_service import (
    CharacteristicMap,
    OscillatoryIntegrator,
    containment,
    decay_constants,
    oscillatory_integral,
    point_bound,
    pullback_wf_check,
    verify_decay,
    verify_rescaling,
    wavefront_estimate,
)

GRID = [2.0**-k for k in range(2, 6)]
FINE = [2.0**-7, 2.0**-8, 2.0**-9]
DELTA = "exp(-x^2/(2*eps^2))/(eps*sqrt(2*pi))"
DOMAIN = {"t": (0.0, 2.0), "x": [(-4.0, 4.0)]}


@pytest.fixture(scope="module")
def flat():
    """u = 1 on [0, 1] with phase x: boundary terms, decay like 1/omega"""
    return PhaseProblem.from_formulas("1", "x", (0.0, 1.0), grad_bound="1", eps_grid=GRID)


@pytest.fixture(scope="module")
def bump_amplitude():
    return PhaseProblem.from_formulas("bump(x)", "x", (-1.0, 1.0), grad_bound="1", eps_grid=GRID)


@pytest.fixture(scope="module")
def delta_family():
    return EpsFamily.from_expressions(DELTA, eps_grid=FINE, natural=True)


@pytest.mark.parametrize("omega", [1.0, 10.0, 123.4, 1000.0])
def test_linear_phase_integral(flat, omega):
    expected = (np.exp(1j * omega) - 1.0) / (1j * omega)
    assert abs(oscillatory_integral(flat, 0.25, omega) - expected) < 1e-11


def test_non_positive_omega(flat):
    with pytest.raises(InvalidArgumentError):
        oscillatory_integral(flat, 0.25, 0.0)


def test_unresolvable_omega(flat):
    integrator = OscillatoryIntegrator(flat)
    with pytest.raises(RefusedError):
        integrator(0.25, 10.0 * integrator.max_omega(0.25))


def test_decay_constants_of_flat_amplitude(flat):
    constants = decay_constants(flat, 0.25, 2)
    assert constants[0] == pytest.approx(1.0)
    assert constants[1] == pytest.approx(1.0)


def test_boundary_terms_break_higher_order_decay(flat):
    report = verify_decay(flat, k_max=2)
    assert report.verdicts[0] == "pass"
    assert report.verdicts[1] == "fail"
    assert report.empirical_slope == pytest.approx(-1.0, abs=0.3)
    assert report.eps == GRID[-1]


def test_compact_amplitude_decays_fast(bump_amplitude):
    report = verify_decay(bump_amplitude, k_max=4)
    assert set(report.verdicts.values()) == {"pass"}
    assert report.empirical_slope < -3.0


def test_stationary_point_refuses_decay():
    problem = PhaseProblem.from_formulas("bump(x)", "x^2", (-1.0, 1.0), grad_bound="1", eps_grid=GRID)
    report = verify_decay(problem, k_max=3, omegas=np.geomspace(1.0, 100.0, 16))
    assert set(report.verdicts.values()) == {"refused"}
    assert report.empirical_slope == pytest.approx(-0.5, abs=0.15)


def test_rescaling_identity(bump_amplitude):
    report = verify_rescaling(bump_amplitude, k_max=2, omegas=np.geomspace(1.0, 400.0, 241))
    assert report.max_relative_error < 1e-8
    assert report.ratio_slopes[1] == pytest.approx(1.0, abs=0.05)
    assert report.ratio_slopes[2] == pytest.approx(2.0, abs=0.05)


def test_delta_wavefront_on_the_line(delta_family):
    estimate = wavefront_estimate(delta_family)
    assert estimate.singular_support == [[0.0]]
    assert estimate.irregular_at([0.0]) == [0, 1]
    assert estimate.eps == FINE


def test_smooth_family_has_empty_wavefront():
    estimate = wavefront_estimate(EpsFamily.from_expressions("exp(-x^2)", eps_grid=FINE))
    assert estimate.singular_support == []


def test_plane_wave_singular_across_the_line():
    """1 (x) delta: only the directions normal to the x-axis"""
    family = EpsFamily.from_expressions(DELTA.replace("x", "y"), dim_in=2, eps_grid=FINE)
    estimate = wavefront_estimate(family, bases=np.array([[0.0, 0.0], [0.0, 0.5]]))
    directions = np.asarray(estimate.directions)
    irregular = directions[estimate.irregular_at([0.0, 0.0])]
    np.testing.assert_allclose(np.abs(irregular), [[0.0, 1.0], [0.0, 1.0]], atol=1e-12)
    assert estimate.irregular_at([0.0, 0.5]) == []


def test_containment(delta_family):
    estimate = wavefront_estimate(delta_family, bases=np.array([[0.0], [0.5]]))
    assert containment(estimate, point_bound([[0.0]])).contained
    report = containment(estimate, point_bound([[0.5]]))
    assert not report.contained
    assert report.violations == [{"base": [0.0], "directions": [0, 1]}]
    assert containment(estimate, estimate).contained


def test_containment_direction_grid_mismatch(delta_family):
    estimate = wavefront_estimate(delta_family, bases=np.array([[0.0]]))
    other = WavefrontEstimate(directions=[[1.0], [-1.0], [1.0]], points=[], threshold=-6.0, eps=FINE)
    with pytest.raises(InvalidArgumentError):
        containment(estimate, other)


def test_pullback_by_dilation(delta_family):
    dilation = EpsFamily.from_expressions("2*x", eps_grid=FINE)
    report = pullback_wf_check(dilation, delta_family, point_bound([[0.0]]), bases=np.array([[0.0], [0.5]]))
    assert report.contained
    assert report.estimate.singular_support == [[0.0]]


def test_characteristics_of_unit_speed():
    field = MollifiedField(Coefficient.from_formula("1", domain=DOMAIN), MollifierSpec(eps_exponents=(4, 6)))
    chars = CharacteristicMap(field, (-1.5, 1.5), 1.5)
    t = np.array([0.0, 0.5, 1.5])
    x = np.array([0.3, 0.3, -1.0])
    np.testing.assert_allclose(chars.backward(2.0**-5, t, x), x - t, atol=1e-9)
    np.testing.assert_allclose(chars.jacobian(2.0**-5, t, x), 1.0, atol=1e-9)
    mapping, jacobian = chars.families()
    assert mapping.dim_in == 2 and mapping.dim_out == 2
    np.testing.assert_allclose(mapping.value_at(2.0**-4, [1.0, 0.3]), [[1.0, -0.7]], atol=1e-9)


def test_characteristics_with_rest_region():
    field = MollifiedField(Coefficient.from_formula("H(x)", domain=DOMAIN), MollifierSpec(eps_exponents=(6, 8)))
    chars = CharacteristicMap(field, (-1.5, 1.5), 1.5)
    moved = chars.backward(2.0**-6, np.array([0.5, 1.0]), np.array([1.0, -0.5]))
    assert moved[0] == pytest.approx(0.5, abs=1e-4)
    assert moved[1] == -0.5


def test_characteristics_preconditions():
    drifting = MollifiedField(Coefficient.from_formula("1 + t", domain=DOMAIN), MollifierSpec())
    with pytest.raises(InvalidArgumentError):
        CharacteristicMap(drifting, (-1.0, 1.0), 1.0)
    field = MollifiedField(Coefficient.from_formula("-1", domain=DOMAIN), MollifierSpec())
    negative = CharacteristicMap(field, (-1.0, 1.0), 1.0)
    with pytest.raises(InvalidArgumentError):
        negative.backward(2.0**-5, np.array([0.5]), np.array([0.0]))
