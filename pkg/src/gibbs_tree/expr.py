"""A small arithmetic-expression language for interaction functions.

Expressions are ordinary infix arithmetic over the variables ``t`` and ``u``
(and the constants ``pi``, ``e``) with the functions ``pow``, ``exp``, ``ln``,
``sign``, ``abs`` and ``root(n, x)``.  ``root`` returns the real n-th root,
so ``root(5, -32) == -2``.  ``^`` is accepted as a synonym for ``**``.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Callable

import numpy as np

from .errors import ConfigurationError


def _root(n, x):
    n = np.asarray(n)
    if np.any(n != np.round(n)) or np.any(n < 1):
        raise ConfigurationError("root(n, x) needs a positive integer n")
    x = np.asarray(x, dtype=float)
    mag = np.abs(x) ** (1.0 / n)
    odd = (np.asarray(n, dtype=int) % 2) == 1
    # Even roots of negative numbers are undefined and propagate as NaN.
    return np.where(x >= 0, mag, np.where(odd, -mag, np.nan))


_FUNCS: dict[str, Callable] = {
    "pow": np.power,
    "exp": np.exp,
    "ln": np.log,
    "log": np.log,
    "sign": np.sign,
    "abs": np.abs,
    "root": _root,
    "sqrt": np.sqrt,
}

_CONSTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}

_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _compile(node: ast.AST, variables: tuple[str, ...]):
    if isinstance(node, ast.Expression):
        return _compile(node.body, variables)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        if node.id in variables:
            name = node.id
            return lambda env: env[name]
        if node.id in _CONSTS:
            value = _CONSTS[node.id]
            return lambda env: value
        raise ConfigurationError(f"unknown name {node.id!r} in expression")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left, variables), _compile(node.right, variables)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        op = _UNOPS[type(node.op)]
        inner = _compile(node.operand, variables)
        return lambda env: op(inner(env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = _FUNCS.get(node.func.id)
        if fn is None:
            raise ConfigurationError(f"unknown function {node.func.id!r} in expression")
        args = [_compile(a, variables) for a in node.args]
        return lambda env: fn(*(a(env) for a in args))
    raise ConfigurationError(f"unsupported syntax in expression: {ast.dump(node)[:60]}")


def parse_expression(text: str, variables: tuple[str, ...] = ("t", "u")) -> Callable[..., np.ndarray]:
    """Compile ``text`` into a vectorized function of ``variables``.

    >>> f = parse_expression("root(5, 4*(t-0.5)*(u-0.5))")
    >>> float(f(1.0, 0.0))
    -1.0
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse expression {text!r}: {exc.msg}") from None
    body = _compile(tree, variables)

    def fn(*args):
        if len(args) != len(variables):
            raise TypeError(f"expected {len(variables)} arguments")
        env = {name: np.asarray(a, dtype=float) for name, a in zip(variables, args)}
        with np.errstate(all="ignore"):
            out = body(env)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(*env.values()).shape).copy()

    fn.__doc__ = text
    return fn
