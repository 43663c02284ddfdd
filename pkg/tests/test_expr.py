import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermijet import jets as J
from fermijet.expr import (
    BinOp,
    Call,
    Const,
    ExprError,
    Neg,
    Pow,
    Var,
    evaluate,
    free_names,
    parse_expression,
    to_source,
)
from fermijet.jets import Jet

NAMES = ["x", "u", "th", "r"]

CORPUS = [
    "1", "x", "-x", "1 + u^2", "sin(th)^2", "x*u - r/2", "(x + u)*(x - u)", "exp(-x^2/2)",
    "sqrt(1 + r^2)", "cos(th)*sin(th)", "x^3 - 3*x*u^2", "1/(1 + x^2)", "-(-x)", "x - (u - r)",
    "x/(u/r)", "x/u/r", "2^3^2", "(x^2)^3", "-x^2", "(-x)^2", "x^-2", "pi*r^2", "1e-3*x",
    ".5*x", "sin(cos(exp(x)))", "x*(u*(r*th))", "((x))", "x - -u", "1 - x + u - r",
    "sin(th)^2*cos(r)^2", "exp(x)*exp(-x)", "sqrt(x^2 + u^2 + 4)", "r^2*sin(th)^2",
    "(1 + x)^4", "x*u/(1 + r^2)^2", "-sin(-x)", "2*pi - x", "x^0", "3.25e+2 * u",
    "(x + u + r)^2 - x^2 - u^2 - r^2", "cos(x)^2 + sin(x)^2", "1 + 0.5*x*u - 0.7*u^2",
    "th - th^3/6 + th^5/120", "-(x + u)/(r - 3)", "x*-u", "exp(sqrt(4 + x))",
    "(th)", "-1", "0.0", "u^10",
]


def test_corpus_size():
    assert len(CORPUS) == 50


@pytest.mark.parametrize("src", CORPUS)
def test_corpus_round_trip(src):
    ast = parse_expression(src, NAMES)
    assert parse_expression(to_source(ast), NAMES) == ast


@pytest.mark.parametrize("src", CORPUS)
def test_corpus_values_agree_with_python(src):
    env = {"x": 0.3, "u": -0.2, "th": 1.1, "r": 0.7}
    pysrc = src.replace("^", "**")
    want = eval(pysrc, {"sin": math.sin, "cos": math.cos, "exp": math.exp, "sqrt": math.sqrt, "pi": math.pi}, env)
    if src == "2^3^2":
        want = 64.0            # exponent chains read left to right: (2^3)^2
    assert evaluate(parse_expression(src, NAMES), env) == pytest.approx(want, rel=1e-13)


def _leaf():
    return st.one_of(st.sampled_from(NAMES).map(Var),
                     st.floats(0, 100, allow_nan=False, allow_infinity=False).map(Const),
                     st.just(Const(math.pi)))


def _tree():
    return st.recursive(_leaf(), lambda sub: st.one_of(
        st.builds(Neg, sub),
        st.builds(BinOp, st.sampled_from("+-*/"), sub, sub),
        st.builds(Pow, sub, st.integers(-3, 6)),
        st.builds(Call, st.sampled_from(["sin", "cos", "exp", "sqrt"]), sub),
    ), max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_tree())
def test_generated_round_trip(tree):
    text = to_source(tree)
    ast = parse_expression(text, NAMES)
    assert parse_expression(to_source(ast), NAMES) == ast
    assert ast == tree


def test_precedence():
    assert parse_expression("-x^2", NAMES) == Neg(Pow(Var("x"), 2))
    assert parse_expression("x + u*r", NAMES) == BinOp("+", Var("x"), BinOp("*", Var("u"), Var("r")))
    assert parse_expression("x - u - r", NAMES) == BinOp("-", BinOp("-", Var("x"), Var("u")), Var("r"))
    assert free_names(parse_expression("sin(th)*x + pi", NAMES)) == {"th", "x"}


def test_spec_examples():
    z = Jet.seed([0.0, 0.0], 3)
    val = evaluate(parse_expression("1 + u^2", ["x", "u"]), {"x": z[0], "u": z[1]})
    assert val.taylor_dict() == {(0, 0): 1.0, (0, 2): 1.0}
    assert evaluate(parse_expression("sin(th)^2", ["th"]), {"th": math.pi / 2}) == pytest.approx(1.0)
    with pytest.raises(ExprError) as err:
        parse_expression("x +* 2", ["x"])
    assert err.value.pos == 3


@pytest.mark.parametrize("src,pos", [
    ("x +* 2", 3), ("y + 1", 0), ("x^2.5", 2), ("x^u", 2), ("(x + 1", 6), ("x 1", 2),
    ("foo(x)", 0), ("sin x", 4), ("x $ 1", 2), ("", 0), ("x)", 1),
])
def test_errors_carry_positions(src, pos):
    with pytest.raises(ExprError) as err:
        parse_expression(src, ["x", "u"])
    assert err.value.pos == pos


def test_evaluation_guards():
    with pytest.raises(ExprError):
        evaluate(parse_expression("1/x", ["x"]), {"x": 0.0})
    with pytest.raises(ExprError):
        evaluate(parse_expression("sqrt(x)", ["x"]), {"x": -1.0})
    with pytest.raises(ExprError):
        evaluate(parse_expression("x^-1", ["x"]), {"x": Jet.variable(0, 0.0, 1, 2)})
    with pytest.raises(ExprError):
        evaluate(parse_expression("x", ["x"]), {})


def test_jet_evaluation_matches_jet_ops():
    z = Jet.seed([0.4, 0.1], 4)
    env = {"x": z[0], "u": z[1]}
    got = evaluate(parse_expression("exp(x)*cos(u)/(2 + x^2)", ["x", "u"]), env)
    want = J.exp(z[0]) * J.cos(z[1]) / (2.0 + z[0] ** 2)
    np.testing.assert_allclose(got.coeffs, want.coeffs, atol=1e-14)
