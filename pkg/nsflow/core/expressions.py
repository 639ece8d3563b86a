"""
Closed-form expression DSL

Formula strings over t, x1..xn (aliases x, y) and eps are parsed into sympy
expressions and compiled to vectorized numpy callables. Only the primitives
listed in FUNCTIONS are accepted; any other name is rejected.
"""

import functools
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from nsflow.core.exceptions import InvalidArgumentError

T = sp.Symbol("t", real=True)
EPS = sp.Symbol("eps", positive=True)

TRANSFORMATIONS = standard_transformations + (convert_xor,)

_MIN = sp.Function("nsflow_min")
_MAX = sp.Function("nsflow_max")
_HEAVISIDE = sp.Function("nsflow_heaviside")

NONSMOOTH_TYPES = (sp.Heaviside, sp.sign, sp.Abs, sp.Min, sp.Max, sp.Piecewise)


def _bump(z: sp.Expr) -> sp.Expr:
    """Unnormalized C-infinity bump supported in |z| < 1"""
    return sp.Piecewise((sp.exp(-1 / (1 - z**2)), z**2 < 1), (0, True))


FUNCTIONS: Dict[str, object] = {
    "H": sp.Heaviside,
    "heaviside": sp.Heaviside,
    "sign": sp.sign,
    "min": sp.Min,
    "max": sp.Max,
    "abs": sp.Abs,
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "tanh": sp.tanh,
    "atan": sp.atan,
    "bump": _bump,
    "pi": sp.pi,
    "E": sp.E,
}

_PARSER_GLOBALS = {
    "__builtins__": {},
    "Integer": sp.Integer,
    "Float": sp.Float,
    "Rational": sp.Rational,
    "Symbol": sp.Symbol,
    "Function": sp.Function,
}

_NUMERIC_NAMESPACE = {
    "nsflow_min": lambda *args: functools.reduce(np.minimum, args),
    "nsflow_max": lambda *args: functools.reduce(np.maximum, args),
    "nsflow_heaviside": lambda z: np.heaviside(z, 0.5),
}


def state_symbols(dim: int) -> List[sp.Symbol]:
    """State symbols x1..xn"""
    return [sp.Symbol(f"x{i + 1}", real=True) for i in range(dim)]


def symbol_table(dim: int, with_time: bool = True, with_eps: bool = False) -> Dict[str, sp.Symbol]:
    """Names a formula may use, including the x/y aliases"""
    xs = state_symbols(dim)
    table = {f"x{i + 1}": s for i, s in enumerate(xs)}
    if dim >= 1:
        table["x"] = xs[0]
    if dim >= 2:
        table["y"] = xs[1]
    if with_time:
        table["t"] = T
    if with_eps:
        table["eps"] = EPS
    return table


def parse_formula(text: str, dim: int, with_time: bool = True, with_eps: bool = False) -> sp.Expr:
    """
    Parse one formula string

    Args:
        text: Formula such as "-sign(x)" or "c*H(t-1)"
        dim: State dimension n (symbols x1..xn)
        with_time: Whether t is allowed
        with_eps: Whether eps is allowed

    Returns:
        sympy expression over the allowed symbols
    """
    if not isinstance(text, str) or not text.strip():
        raise InvalidArgumentError("Empty formula", formula=text)

    symbols = symbol_table(dim, with_time=with_time, with_eps=with_eps)
    local_dict = {**FUNCTIONS, **symbols}

    try:
        expr = parse_expr(
            text, local_dict=local_dict, global_dict=dict(_PARSER_GLOBALS), transformations=TRANSFORMATIONS
        )
    except Exception as e:  # sympy raises assorted parser errors
        raise InvalidArgumentError(f"Cannot parse formula: {e}", formula=text) from e

    expr = sp.sympify(expr)
    unknown_functions = sorted(str(f.func) for f in expr.atoms(AppliedUndef))
    if unknown_functions:
        raise InvalidArgumentError("Unknown functions in formula", formula=text, names=unknown_functions)

    unknown = sorted(str(s) for s in expr.free_symbols if s not in set(symbols.values()))
    if unknown:
        raise InvalidArgumentError("Unknown symbols in formula", formula=text, names=unknown)

    return expr


def is_smooth(expr: sp.Expr) -> bool:
    """True when the formula has no jump or kink primitives"""
    return not any(expr.has(kind) for kind in NONSMOOTH_TYPES)


def _prepare(expr: sp.Expr) -> sp.Expr:
    """Swap primitives whose numpy printing is not elementwise-safe"""
    expr = expr.replace(sp.DiracDelta, lambda *args: sp.Integer(0))
    expr = expr.replace(sp.Heaviside, lambda *args: _HEAVISIDE(args[0]))
    expr = expr.replace(sp.Min, lambda *args: _MIN(*args))
    expr = expr.replace(sp.Max, lambda *args: _MAX(*args))
    return expr


class CompiledExpression:
    """A parsed formula with its vectorized numpy evaluator"""

    def __init__(self, expr: sp.Expr, variables: Sequence[sp.Symbol]):
        self.expr = sp.sympify(expr)
        self.variables: Tuple[sp.Symbol, ...] = tuple(variables)
        self._fn = sp.lambdify(self.variables, _prepare(self.expr), modules=[_NUMERIC_NAMESPACE, "numpy"])

    @classmethod
    def from_text(
        cls, text: str, dim: int, with_time: bool = True, with_eps: bool = False
    ) -> "CompiledExpression":
        """Parse and compile with the canonical variable order (eps, t, x1..xn)"""
        expr = parse_formula(text, dim, with_time=with_time, with_eps=with_eps)
        variables: List[sp.Symbol] = []
        if with_eps:
            variables.append(EPS)
        if with_time:
            variables.append(T)
        variables.extend(state_symbols(dim))
        return cls(expr, variables)

    def __call__(self, *values: object) -> np.ndarray:
        arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values])
        with np.errstate(all="ignore"):
            out = self._fn(*arrays)
        return np.array(np.broadcast_to(np.asarray(out, dtype=float), arrays[0].shape))

    @property
    def smooth(self) -> bool:
        return is_smooth(self.expr)

    def depends_on(self, symbol: sp.Symbol) -> bool:
        return symbol in self.expr.free_symbols

    def diff(self, symbol: sp.Symbol, order: int = 1) -> "CompiledExpression":
        """Symbolic derivative, delta terms dropped"""
        derivative = sp.diff(self.expr, symbol, order)
        derivative = derivative.replace(sp.DiracDelta, lambda *args: sp.Integer(0))
        return CompiledExpression(derivative, self.variables)

    def subs(self, mapping: Dict[sp.Symbol, sp.Expr]) -> "CompiledExpression":
        return CompiledExpression(self.expr.subs(mapping), self.variables)

    def negated(self) -> "CompiledExpression":
        return CompiledExpression(-self.expr, self.variables)

    def linear_coefficients(self, symbol: sp.Symbol) -> Optional[Tuple["CompiledExpression", "CompiledExpression"]]:
        """(slope, intercept) when the formula is affine in symbol, else None"""
        if not self.smooth:
            return None
        if sp.simplify(sp.diff(self.expr, symbol, 2)) != 0:
            return None
        slope = sp.diff(self.expr, symbol)
        intercept = sp.simplify(self.expr - slope * symbol)
        return CompiledExpression(slope, self.variables), CompiledExpression(intercept, self.variables)

    def __repr__(self) -> str:
        return f"CompiledExpression({self.expr})"


def compile_many(
    texts: Iterable[str], dim: int, with_time: bool = True, with_eps: bool = False
) -> List[CompiledExpression]:
    """Compile a formula vector"""
    return [CompiledExpression.from_text(text, dim, with_time=with_time, with_eps=with_eps) for text in texts]
