"""Minimal arithmetic expression grammar for angle functions on the plane.

Grammar (bit-exact contract, enforced by an AST whitelist):

    expr     := literal | name | unary | binary | call | (expr)
    literal  := integer or float literal
    name     := "x2" | "x3" | "pi" | "e"
    unary    := +expr | -expr
    binary   := expr (+ | - | * | / | **) expr
    call     := func(expr, ...)   with func one of
                sin cos tan asin acos atan atan2 sinh cosh tanh
                exp log log10 sqrt abs min max

Anything else (attribute access, subscripts, comparisons, lambdas, names
outside the list) is rejected at compile time. Evaluation is vectorized:
x2 and x3 may be arrays.
"""

from __future__ import annotations

import ast

import numpy as np

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "asin": np.arcsin,
    "acos": np.arccos,
    "atan": np.arctan,
    "atan2": np.arctan2,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "log10": np.log10,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}

_CONSTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    """Raised for expressions outside the documented grammar."""


def _check(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"literal {node.value!r} is not a number")
    elif isinstance(node, ast.Name):
        if node.id not in ("x2", "x3") and node.id not in _CONSTS:
            raise ExpressionError(f"unknown name '{node.id}' (allowed: x2, x3, pi, e)")
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise ExpressionError("only unary +/- allowed")
        _check(node.operand)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not in grammar")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only calls to the documented function list are allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not in the grammar")
        for arg in node.args:
            _check(arg)
    else:
        raise ExpressionError(f"syntax element {type(node).__name__} not in grammar")


def _eval(node: ast.AST, env: dict):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else +v
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](*(_eval(a, env) for a in node.args))
    raise ExpressionError(f"unreachable node {type(node).__name__}")


def compile_expression(text: str):
    """Compile an expression in the grammar to a vectorized fn(x2, x3)."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression: {exc}") from exc
    _check(tree)

    def fn(x2, x3):
        return _eval(tree, {"x2": np.asarray(x2, dtype=float), "x3": np.asarray(x3, dtype=float)})

    fn.source = text
    return fn
