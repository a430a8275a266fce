"""A small closed expression language over classical values.

Expressions use Python syntax restricted to arithmetic, comparisons,
boolean logic, conditional selection, tuple indexing and a fixed set of
functions.  The set of referenced names is known statically, which is what
makes dependency declarations auditable.
"""
from __future__ import annotations

import ast
import math
import operator
from typing import Any, Mapping

from .geometry import SpacetimePoint


class ExprError(ValueError):
    pass


def _select(cond, a, b):
    return a if cond else b


def _bit(value, k):
    return (int(value) >> int(k)) & 1


def _point(t, *x):
    return SpacetimePoint(float(t), tuple(float(v) for v in x))


FUNCTIONS = {
    "point": _point,
    "select": _select,
    "abs": abs,
    "min": min,
    "max": max,
    "floor": lambda v: int(math.floor(v)),
    "ceil": lambda v: int(math.ceil(v)),
    "sqrt": math.sqrt,
    "cos": math.cos,
    "sin": math.sin,
    "round": round,
    "int": int,
    "bit": _bit,
    "len": len,
    "sum": lambda *v: sum(v[0]) if len(v) == 1 else sum(v),
}

CONSTANTS = {"pi": math.pi, "true": True, "false": False}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
    ast.Pow: operator.pow,
    ast.BitXor: operator.xor,
    ast.BitAnd: operator.and_,
    ast.BitOr: operator.or_,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos, ast.Not: operator.not_}
_COMPARE = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
}
_ALLOWED = (
    ast.Expression, ast.Constant, ast.Name, ast.Load, ast.BinOp, ast.UnaryOp, ast.BoolOp,
    ast.And, ast.Or, ast.Compare, ast.IfExp, ast.Call, ast.Subscript, ast.Tuple,
    *_BINOPS, *_UNARY, *_COMPARE,
)


class Expr:
    __slots__ = ("text", "_tree", "names")

    def __init__(self, text: str):
        self.text = text.strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ExprError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        names = set()
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED):
                raise ExprError(f"construct {type(node).__name__} not allowed in {self.text!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
                    raise ExprError(f"unknown function in {self.text!r}")
            elif isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ExprError(f"only numeric literals allowed in {self.text!r}")
        for node in ast.walk(tree):
            if isinstance(node, ast.Name) and node.id not in CONSTANTS:
                names.add(node.id)
        for node in ast.walk(tree):
            if isinstance(node, ast.Call):
                names.discard(node.func.id)
        self._tree = tree
        self.names = frozenset(names)

    def __repr__(self) -> str:
        return f"Expr({self.text!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expr) and other.text == self.text

    def __hash__(self) -> int:
        return hash(self.text)

    @property
    def bare_name(self) -> str | None:
        body = self._tree.body
        return body.id if isinstance(body, ast.Name) else None

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        return _eval(self._tree.body, env, self.text)


def _eval(node, env, text):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        raise ExprError(f"name {node.id!r} is not available in {text!r}")
    if isinstance(node, ast.BinOp):
        left, right = _eval(node.left, env, text), _eval(node.right, env, text)
        try:
            return _BINOPS[type(node.op)](left, right)
        except (TypeError, ZeroDivisionError) as exc:
            raise ExprError(f"{exc} in {text!r}") from None
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env, text))
    if isinstance(node, ast.BoolOp):
        vals = (_eval(v, env, text) for v in node.values)
        return all(vals) if isinstance(node.op, ast.And) else any(vals)
    if isinstance(node, ast.Compare):
        left = _eval(node.left, env, text)
        for op, comp in zip(node.ops, node.comparators):
            right = _eval(comp, env, text)
            if not _COMPARE[type(op)](left, right):
                return False
            left = right
        return True
    if isinstance(node, ast.IfExp):
        return _eval(node.body if _eval(node.test, env, text) else node.orelse, env, text)
    if isinstance(node, ast.Call):
        args = [_eval(a, env, text) for a in node.args]
        try:
            return FUNCTIONS[node.func.id](*args)
        except (TypeError, ValueError) as exc:
            raise ExprError(f"{node.func.id}: {exc} in {text!r}") from None
    if isinstance(node, ast.Subscript):
        seq = _eval(node.value, env, text)
        idx = _eval(node.slice, env, text)
        try:
            return seq[int(idx)]
        except (TypeError, IndexError) as exc:
            raise ExprError(f"bad index in {text!r}: {exc}") from None
    if isinstance(node, ast.Tuple):
        return tuple(_eval(e, env, text) for e in node.elts)
    raise ExprError(f"unsupported construct in {text!r}")


def as_expr(value) -> Expr:
    return value if isinstance(value, Expr) else Expr(str(value))
