"""
Test the formula DSL
"""

import numpy as np
import pytest

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.core.expressions import EPS, T, CompiledExpression, is_smooth, parse_formula, state_symbols


def test_aliases_map_to_state_symbols():
    """x and y are the first two state symbols"""
    x1, x2 = state_symbols(2)
    expr = parse_formula("x + 2*y", 2)
    assert expr == x1 + 2 * x2


def test_caret_is_power():
    expr = parse_formula("x^2", 1, with_time=False)
    assert expr == state_symbols(1)[0] ** 2


@pytest.mark.parametrize(
    "text",
    ["", "   ", "foo(x)", "z + x", "x +* 2"],
)
def test_rejects_bad_formulas(text):
    """Unknown names, empty strings and syntax errors are invalid arguments"""
    with pytest.raises(InvalidArgumentError):
        parse_formula(text, 1)


def test_time_and_eps_gating():
    with pytest.raises(InvalidArgumentError):
        parse_formula("t*x", 1, with_time=False)
    with pytest.raises(InvalidArgumentError):
        parse_formula("eps*x", 1)
    expr = parse_formula("eps*x", 1, with_eps=True)
    assert EPS in expr.free_symbols


def test_heaviside_half_at_zero():
    """H(0) evaluates to one half, elementwise over arrays"""
    f = CompiledExpression.from_text("H(x)", 1, with_time=False)
    np.testing.assert_allclose(f(np.array([-1.0, 0.0, 2.0])), [0.0, 0.5, 1.0])


def test_min_max_are_elementwise():
    f = CompiledExpression.from_text("max(x, 0) + min(x, 1)", 1, with_time=False)
    x = np.array([-2.0, 0.5, 3.0])
    np.testing.assert_allclose(f(x), np.maximum(x, 0) + np.minimum(x, 1))


def test_scalar_formula_broadcasts():
    """A constant formula returns one value per point"""
    f = CompiledExpression.from_text("3", 1)
    out = f(np.zeros(5), np.linspace(0, 1, 5))
    assert out.shape == (5,)
    np.testing.assert_allclose(out, 3.0)


def test_bump_support():
    f = CompiledExpression.from_text("bump(x)", 1, with_time=False)
    values = f(np.array([-1.5, -1.0, 0.0, 0.999, 1.0]))
    assert values[0] == 0.0 and values[1] == 0.0 and values[4] == 0.0
    assert values[2] == pytest.approx(np.exp(-1.0))
    assert 0.0 <= values[3] < 1e-100


def test_smoothness_flag():
    assert is_smooth(parse_formula("sin(x)*exp(t)", 1))
    assert not is_smooth(parse_formula("abs(x)", 1))
    assert not is_smooth(parse_formula("H(-x)", 1))


def test_diff_drops_delta():
    """The derivative of H is zero off the jump"""
    f = CompiledExpression.from_text("x*H(x)", 1, with_time=False)
    df = f.diff(state_symbols(1)[0])
    np.testing.assert_allclose(df(np.array([-1.0, 2.0])), [0.0, 1.0])


def test_linear_coefficients():
    f = CompiledExpression.from_text("2*t*x + 3", 1)
    slope, intercept = f.linear_coefficients(state_symbols(1)[0])
    assert float(slope(1.5, 0.0)) == pytest.approx(3.0)
    assert float(intercept(1.5, 0.0)) == pytest.approx(3.0)
    assert CompiledExpression.from_text("x^2", 1).linear_coefficients(state_symbols(1)[0]) is None


def test_variable_order_eps_time_state():
    f = CompiledExpression.from_text("eps + 10*t + 100*x", 1, with_eps=True)
    assert f.variables == (EPS, T, state_symbols(1)[0])
    assert float(f(1.0, 2.0, 3.0)) == pytest.approx(321.0)
