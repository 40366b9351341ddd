"""Exact expression evaluation.

Two evaluators share one semantics: ``evaluate_expr`` walks the tree and is
used for constant folding, rewards and tests; ``compile_expr`` turns a typed
expression into a Python closure over a packed state tuple for the state-space
builder. Doubles are exact ``Fraction`` values in both, so guards such as
``water_visib < (max_visib-min_visib)/3`` never suffer from rounding.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Mapping

from ..errors import EvaluationError
from . import syntax as ast


def _div(a, b, site=None):
    if b == 0:
        where = f" in {site}" if site else ""
        raise EvaluationError(f"division by zero{where}")
    return Fraction(a) / b


def round_half_away(x) -> int:
    """Nearest integer, ties away from zero: 4.5 -> 5, -4.5 -> -5."""
    x = Fraction(x)
    if x >= 0:
        return math.floor(x + Fraction(1, 2))
    return -math.floor(-x + Fraction(1, 2))


def _mod(a, b, site=None):
    if b == 0:
        where = f" in {site}" if site else ""
        raise EvaluationError(f"modulo by zero{where}")
    return a % b


def _site(expr: ast.Expr) -> str:
    from .printer import print_expr

    text = print_expr(expr)
    return f"'{text}' at {expr.pos}" if expr.pos else f"'{text}'"


def _is_active(config, feature: str) -> bool:
    return feature in config


def evaluate_expr(expr: ast.Expr, valuation: Mapping[str, int] | None = None, config=None):
    """Evaluate ``expr`` under a variable valuation and feature configuration.

    ``config`` may be a ``Configuration`` or any container of feature names.
    Integer expressions yield ``int``, doubles yield exact ``Fraction``.
    """
    valuation = valuation or {}
    if isinstance(expr, ast.Literal):
        return expr.value
    if isinstance(expr, ast.Var):
        return valuation[expr.name]
    if isinstance(expr, ast.Ident):
        try:
            return valuation[expr.name]
        except KeyError:
            raise EvaluationError(f"unbound identifier {expr.name}", expr.pos) from None
    if isinstance(expr, ast.Active):
        if config is None:
            raise EvaluationError(f"active({expr.feature}) needs a feature configuration", expr.pos)
        return _is_active(config, expr.feature)
    if isinstance(expr, ast.Unary):
        v = evaluate_expr(expr.operand, valuation, config)
        return (not v) if expr.op == "!" else -v
    if isinstance(expr, ast.Ite):
        if evaluate_expr(expr.cond, valuation, config):
            return evaluate_expr(expr.then, valuation, config)
        return evaluate_expr(expr.other, valuation, config)
    if isinstance(expr, ast.Binary):
        op = expr.op
        left = evaluate_expr(expr.left, valuation, config)
        if op == "&":
            return bool(left) and bool(evaluate_expr(expr.right, valuation, config))
        if op == "|":
            return bool(left) or bool(evaluate_expr(expr.right, valuation, config))
        if op == "=>":
            return (not left) or bool(evaluate_expr(expr.right, valuation, config))
        right = evaluate_expr(expr.right, valuation, config)
        if op == "/":
            return _div(left, right, _site(expr))
        return _BINARY[op](left, right)
    if isinstance(expr, ast.Call):
        args = [evaluate_expr(a, valuation, config) for a in expr.args]
        if expr.func == "mod":
            return _mod(args[0], args[1], _site(expr))
        return _CALLS[expr.func](*args)
    if isinstance(expr, ast.LabelRef):
        raise EvaluationError(f'label "{expr.name}" cannot be evaluated directly', expr.pos)
    raise TypeError(f"not an expression: {expr!r}")


_BINARY: dict[str, Callable] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}

_CALLS: dict[str, Callable] = {
    "round": round_half_away,
    "floor": lambda x: math.floor(x),
    "ceil": lambda x: math.ceil(x),
    "min": min,
    "max": max,
}


# --------------------------------------------------------------------------
# closure compilation

_PY_OPS = {"+": "+", "-": "-", "*": "*", "=": "==", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


class _Codegen:
    def __init__(self, feature_bits: Mapping[str, int], mask_slot: int):
        self.feature_bits = feature_bits
        self.mask_slot = mask_slot
        self.namespace: dict[str, object] = {
            "_div": _div,
            "_mod": _mod,
            "_round": round_half_away,
            "_floor": math.floor,
            "_ceil": math.ceil,
        }

    def bind(self, value) -> str:
        name = f"_k{len(self.namespace)}"
        self.namespace[name] = value
        return name

    def emit(self, expr: ast.Expr) -> str:
        if isinstance(expr, ast.Literal):
            if isinstance(expr.value, (bool, int)):
                return repr(expr.value)
            return self.bind(expr.value)
        if isinstance(expr, ast.Var):
            return f"v[{expr.slot}]"
        if isinstance(expr, ast.Active):
            bit = 1 << self.feature_bits[expr.feature]
            return f"((v[{self.mask_slot}] & {bit}) != 0)"
        if isinstance(expr, ast.Unary):
            inner = self.emit(expr.operand)
            return f"(not {inner})" if expr.op == "!" else f"(-{inner})"
        if isinstance(expr, ast.Ite):
            return f"({self.emit(expr.then)} if {self.emit(expr.cond)} else {self.emit(expr.other)})"
        if isinstance(expr, ast.Binary):
            a, b = self.emit(expr.left), self.emit(expr.right)
            if expr.op == "&":
                return f"({a} and {b})"
            if expr.op == "|":
                return f"({a} or {b})"
            if expr.op == "=>":
                return f"((not {a}) or {b})"
            if expr.op == "/":
                return f"_div({a}, {b}, {self.bind(_site(expr))})"
            return f"({a} {_PY_OPS[expr.op]} {b})"
        if isinstance(expr, ast.Call):
            args = ", ".join(self.emit(x) for x in expr.args)
            if expr.func in ("min", "max"):
                return f"{expr.func}({args})"
            if expr.func == "mod":
                return f"_mod({args}, {self.bind(_site(expr))})"
            return f"_{expr.func}({args})"
        raise TypeError(f"cannot compile {expr!r}")


def compile_expr(expr: ast.Expr, feature_bits: Mapping[str, int], mask_slot: int) -> Callable[[tuple], object]:
    """Compile a typed expression into ``f(state_tuple)``.

    Variables read ``state[slot]``; ``active(f)`` tests bit ``feature_bits[f]``
    of ``state[mask_slot]``.
    """
    gen = _Codegen(feature_bits, mask_slot)
    body = gen.emit(expr)
    return eval(f"lambda v: {body}", gen.namespace)  # noqa: S307 - generated from a typed AST
