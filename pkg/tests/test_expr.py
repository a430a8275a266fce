import math

import pytest
from hypothesis import given, strategies as st

from minkowski_tasks.expr import Expr, ExprError, as_expr
from minkowski_tasks.geometry import point


def test_arithmetic_and_names():
    e = Expr("(I1 + k) % 2")
    assert e.names == {"I1", "k"}
    assert e.evaluate({"I1": 1, "k": 1}) == 0


def test_functions_and_constants():
    assert Expr("cos(pi/8)**2").evaluate({}) == pytest.approx(math.cos(math.pi / 8) ** 2)
    assert Expr("select(I2==0, Q0, Q1)").evaluate({"I2": 1, "Q0": "a", "Q1": "b"}) == "b"
    assert Expr("point(t-1, x)").evaluate({"t": 10, "x": 2}) == point(9, 2)
    assert Expr("I1[I2]").evaluate({"I1": (0, 1), "I2": 1}) == 1
    assert Expr("bit(6, 1)").evaluate({}) == 1


@pytest.mark.parametrize("text", ["__import__('os')", "a.b", "lambda: 1", "'s'", "[1, 2]", "f(1)"])
def test_rejects_unsafe(text):
    with pytest.raises(ExprError):
        Expr(text)


def test_syntax_error():
    with pytest.raises(ExprError):
        Expr("1 +")


def test_unknown_name_at_evaluation():
    with pytest.raises(ExprError):
        Expr("missing + 1").evaluate({})


def test_as_expr_passthrough():
    e = Expr("x")
    assert as_expr(e) is e
    assert e.bare_name == "x" and Expr("x+1").bare_name is None


@given(st.integers(-1000, 1000), st.integers(-1000, 1000))
def test_matches_python(a, b):
    assert Expr("a * b - (a + 3) % 7").evaluate({"a": a, "b": b}) == a * b - (a + 3) % 7
    assert Expr("a ^ b").evaluate({"a": a, "b": b}) == a ^ b
