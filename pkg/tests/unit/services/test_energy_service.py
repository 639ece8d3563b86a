"""
Test the upwind solver, the energy estimate and the Garding probes
"""

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError, RefusedError
from nsflow.models.coefficient import Coefficient
from nsflow.services.energy_service import (
    EnergySolver,
    check_energy_estimate,
    garding_probe,
    garding_probe_coefficient,
    garding_probe_log,
    quadratic_form,
    solve_fd,
)

DOMAIN = {"t": (0.0, 1.0), "x": [(-3.0, 3.0)]}


def gaussian(x):
    return np.exp(-4.0 * x**2)


def test_upwind_solution_of_smooth_problem(smooth):
    sol = solve_fd(smooth, lambda t, x: 0.2 * np.cos(x), None, gaussian, grid=(400, 400))
    assert sol.values.shape == (401, 400)
    assert sol.cfl < 1.0
    assert sol.nodes[0] == pytest.approx(-3.0)
    report = check_energy_estimate(sol, smooth, lambda t, x: 0.2 * np.cos(x))
    assert report.verdict == "pass"
    assert report.h == pytest.approx(0.05, abs=5e-3)
    assert report.worst_ratio <= 1.0 + report.slack
    assert report.lhs[0] == pytest.approx(sol.norms[0])


def test_constant_transport_moves_the_profile():
    sol = EnergySolver(1.0).solve(gaussian, window=(0.0, 1.0), grid=(801, 400), domain=(-4.0, 4.0))
    peak = sol.nodes[int(np.argmax(sol.at(1.0)))]
    assert peak == pytest.approx(1.0, abs=0.05)
    assert sol.norms[-1] <= sol.norms[0]


def test_source_term_enters_the_bound():
    solver = EnergySolver(0.5, 0.0, lambda t, x: np.exp(-(x**2)))
    sol = solver.solve(np.zeros(200), grid=(200, 100), domain=(-4.0, 4.0))
    assert sol.norms[0] == 0.0
    assert sol.norms[-1] > 0.0
    assert solver.check(sol).verdict == "pass"


def test_cfl_violation():
    with pytest.raises(InvalidArgumentError):
        solve_fd(2.0, None, None, gaussian, grid=(1024, 10), domain=(-3.0, 3.0))


def test_jump_refuses_the_estimate(minus_sign):
    sol = solve_fd(minus_sign, None, None, gaussian, grid=(200, 100))
    with pytest.raises(RefusedError) as info:
        check_energy_estimate(sol, minus_sign)
    assert "Garding" in info.value.context["hint"]


def test_blow_up_of_divergence_refuses_the_estimate():
    """a = -sign(x) sqrt|x| is continuous with div a ~ |x|^-1/2"""
    coefficient = Coefficient.from_formula("-sign(x)*sqrt(abs(x))", domain=DOMAIN)
    sol = solve_fd(coefficient, None, None, gaussian, grid=(200, 100))
    with pytest.raises(RefusedError):
        check_energy_estimate(sol, coefficient)


def test_quadratic_form_of_smooth_coefficient(smooth):
    """<Q v, v> tends to -a'(0) / 2"""
    report = garding_probe_coefficient(smooth)
    assert report.values[-1] == pytest.approx(-0.15, abs=1e-4)
    assert abs(report.slope) < 0.05


@pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
def test_holder_probe(alpha):
    report = garding_probe(alpha)
    assert report.slope == pytest.approx(alpha - 1.0, abs=1e-3)
    assert report.constant < 0.0
    scaled = np.asarray(report.values) * np.asarray(report.eps) ** (1.0 - alpha)
    np.testing.assert_allclose(scaled, report.constant, rtol=1e-3)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 0.2])
def test_holder_probe_range(alpha):
    with pytest.raises(InvalidArgumentError):
        garding_probe(alpha)


def test_log_probe():
    report = garding_probe_log()
    assert report.mode == "log"
    assert report.slope == pytest.approx(report.constant, rel=0.02)
    assert report.values[-1] < report.values[0] < 0.0


def test_quadratic_form_of_constant_vanishes():
    assert quadratic_form(lambda x: np.ones_like(x), 1e-3) == pytest.approx(0.0, abs=1e-10)
