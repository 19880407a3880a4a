"""Tiny whitelisted expression language for coefficient fields.

Grammar: numbers, coordinates ``x0 .. xn``, the constant ``pi``, unary minus,
``+ - * /``, ``**`` with a numeric exponent, and ``exp(...)``.  Anything else
is rejected before evaluation.
"""
from __future__ import annotations

import ast
import math

import numpy as np


class ExpressionError(ValueError):
    pass


_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide}


def _check(node: ast.AST, dim: int) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, dim)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(f"unsupported constant {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id == "pi":
            return
        if not (node.id.startswith("x") and node.id[1:].isdigit() and int(node.id[1:]) < dim):
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError("only unary +/- are allowed")
        _check(node.operand, dim)
    elif isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            if not isinstance(node.right, ast.Constant) and not (
                    isinstance(node.right, ast.UnaryOp) and isinstance(node.right.operand, ast.Constant)):
                raise ExpressionError("exponents must be numeric constants")
        elif type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} is not allowed")
        _check(node.left, dim)
        _check(node.right, dim)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id == "exp") or len(node.args) != 1 or node.keywords:
            raise ExpressionError("only exp(<expr>) calls are allowed")
        _check(node.args[0], dim)
    else:
        raise ExpressionError(f"syntax element {type(node).__name__} is not allowed")


def _eval(node: ast.AST, pts: np.ndarray):
    if isinstance(node, ast.Expression):
        return _eval(node.body, pts)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return math.pi if node.id == "pi" else pts[:, int(node.id[1:])]
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, pts)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _eval(node.left, pts), _eval(node.right, pts)
        if isinstance(node.op, ast.Pow):
            return np.power(a, b)
        return _BINOPS[type(node.op)](a, b)
    return np.exp(_eval(node.args[0], pts))


def compile_expression(text: str, dim: int):
    """Return ``f(points) -> values`` for a whitelisted scalar expression."""
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _check(tree, dim)

    def fn(pts: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(_eval(tree, pts), dtype=float), (pts.shape[0],)).copy()

    return fn


def multivector_field(spec: dict[str, str] | list[str], n: int):
    """Build ``f(points) -> (points, 2^n)`` from per-blade expressions.

    ``spec`` is either a full list of 2^n expressions or a mapping from blade
    names (``"e0"``, ``"e1"``, ``"e12"`` ...) to expressions.
    """
    N = 1 << n
    if isinstance(spec, (list, tuple)):
        if len(spec) != N:
            raise ExpressionError(f"expected {N} blade expressions")
        items = {i: s for i, s in enumerate(spec)}
    else:
        items = {blade_index(name, n): s for name, s in spec.items()}
    compiled = {i: compile_expression(s, n + 1) for i, s in items.items()}

    def fn(pts: np.ndarray) -> np.ndarray:
        out = np.zeros((pts.shape[0], N))
        for i, f in compiled.items():
            out[:, i] = f(pts)
        return out

    return fn


def blade_index(name: str, n: int) -> int:
    if name in ("e0", "1", "scalar"):
        return 0
    if not name.startswith("e") or not name[1:].isdigit():
        raise ExpressionError(f"bad blade name {name!r}")
    idx = 0
    prev = 0
    for ch in name[1:]:
        g = int(ch)
        if not prev < g <= n:
            raise ExpressionError(f"blade {name!r} must list increasing generators in 1..{n}")
        idx |= 1 << (g - 1)
        prev = g
    return idx
