import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acbc.expr import (
    Add,
    Const,
    Dictionary,
    DictionaryError,
    DomainError,
    ExprSyntaxError,
    Func,
    IndexOutOfRange,
    Mul,
    Var,
    eval_dictionary,
    eval_term,
    parse_term,
    render_term,
)

CASE1_TERMS = ["x1", "x2", "u1", "ln(1 + x1*x1)", "ln(1 + x2*x2)", "ln(1 + u1*u1)",
               "cos(x1)", "cos(x2)", "cos(u1)", "sin(u1)"]


def test_parse_sin_input():
    assert parse_term("sin(u1)", 2, 1) == Func("sin", Var("input", 1))


def test_parse_log_composite():
    t = parse_term("ln(1 + x1*x1)", 2, 1)
    assert t == Func("ln", Add(Const(1.0), Mul(Var("state", 1), Var("state", 1))))


def test_parse_bare_variable():
    assert parse_term("x2", 2, 1) == Var("state", 2)


def test_precedence_and_whitespace():
    a = parse_term("x1+x2*u1", 2, 1)
    b = parse_term("  x1 +  x2 * u1 ", 2, 1)
    assert a == b == Add(Var("state", 1), Mul(Var("state", 2), Var("input", 1)))
    assert parse_term("(x1+x2)*u1", 2, 1) == Mul(Add(Var("state", 1), Var("state", 2)), Var("input", 1))


@pytest.mark.parametrize("src,pos", [("sin(x1", 6), ("x1 + ", 5), ("x1 ** x2", 4), ("exp(x1)", 0), ("x1 $", 3)])
def test_syntax_errors_carry_position(src, pos):
    with pytest.raises(ExprSyntaxError) as ei:
        parse_term(src, 2, 1)
    assert ei.value.pos == pos


@pytest.mark.parametrize("src", ["x3", "u2", "x0"])
def test_index_out_of_range(src):
    with pytest.raises(IndexOutOfRange):
        parse_term(src, 2, 1)


def test_eval_examples():
    x0, u0 = np.zeros(2), np.zeros(1)
    assert eval_term(parse_term("cos(x1)", 2, 1), x0, u0) == 1.0
    assert eval_term(parse_term("ln(1+x1*x1)", 2, 1), np.array([1.0, 0.0]), u0) == pytest.approx(0.693147, abs=1e-6)
    assert eval_term(parse_term("sin(u1)", 2, 1), x0, u0) == 0.0


def test_ln_domain_error():
    with pytest.raises(DomainError):
        eval_term(parse_term("ln(x1)", 1, 0), np.array([0.0]), np.zeros(0))


def test_case1_dictionary_values():
    d = Dictionary.from_strings(2, 1, CASE1_TERMS)
    np.testing.assert_array_equal(eval_dictionary(d, [0, 0], [0]), [0, 0, 0, 0, 0, 0, 1, 1, 1, 0])
    want = [1, 0, 0, math.log(2), 0, 0, math.cos(1), 1, 1, 0]
    np.testing.assert_allclose(eval_dictionary(d, [1, 0], [0]), want, rtol=0, atol=1e-15)


def test_dictionary_validation():
    with pytest.raises(DictionaryError):
        Dictionary.from_strings(2, 1, ["x2", "x1", "u1"])
    with pytest.raises(DictionaryError):
        Dictionary.from_strings(1, 1, ["x1", "u1", "cos(2)"])
    with pytest.raises(DictionaryError):
        Dictionary.from_strings(2, 1, ["x1", "x2"])
    # cos(x1) is 1 at the origin but still depends on a variable
    Dictionary.from_strings(1, 1, ["x1", "u1", "cos(x1)"])


def test_ln_domain_check_on_box():
    d = Dictionary.from_strings(1, 0, ["x1", "ln(1 + x1*x1)"])
    d.check_ln_domain([-5.0], [5.0])
    bad = Dictionary.from_strings(1, 0, ["x1", "ln(x1)"])
    with pytest.raises(DomainError):
        bad.check_ln_domain([-1.0], [1.0])


def test_batch_evaluation_matches_pointwise(rng):
    d = Dictionary.from_strings(2, 1, CASE1_TERMS)
    X, U = rng.uniform(-3, 3, (2, 50)), rng.uniform(-3, 3, (1, 50))
    batch = eval_dictionary(d, X, U)
    for k in range(50):
        np.testing.assert_array_equal(batch[:, k], eval_dictionary(d, X[:, k], U[:, k]))


# -- property tests --------------------------------------------------------

_leaves = st.one_of(
    st.builds(Var, st.just("state"), st.integers(1, 3)),
    st.builds(Var, st.just("input"), st.integers(1, 2)),
    st.builds(Const, st.floats(-50, 50, allow_nan=False).map(lambda v: round(v, 3))),
)
_terms = st.recursive(
    _leaves,
    lambda kids: st.one_of(
        st.builds(Add, kids, kids),
        st.builds(Mul, kids, kids),
        st.builds(Func, st.sampled_from(["sin", "cos", "tan", "atan", "tanh", "ln"]), kids),
    ),
    max_leaves=12,
)


@settings(max_examples=300, deadline=None)
@given(_terms)
def test_render_parse_round_trip(t):
    assert parse_term(render_term(t), 3, 2) == t


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_prefix_law(x, u):
    d = Dictionary.from_strings(3, 2, ["x1", "x2", "x3", "u1", "u2", "sin(x1*u2)", "tanh(1 + x3*x3)"])
    v = eval_dictionary(d, x, u)
    assert np.array_equal(v[:5], np.array(x + u))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CASE1_TERMS[3:] + ["tanh(1 + x1*x1)", "atan(x2*u1)", "sin(1 + x1*x1)"]),
       st.integers(0, 10_000))
def test_central_differences_second_order(src, seed):
    # halving h should cut the central-difference error by about 4
    t = parse_term(src, 2, 1)
    r = np.random.default_rng(seed)
    x, u = r.uniform(-1.5, 1.5, 2), r.uniform(-1.5, 1.5, 1)
    f = lambda s: eval_term(t, x + s * np.array([1.0, 0.0]), u)  # noqa: E731
    ref = (f(1e-5) - f(-1e-5)) / 2e-5
    e1 = abs((f(1e-2) - f(-1e-2)) / 2e-2 - ref)
    e2 = abs((f(5e-3) - f(-5e-3)) / 1e-2 - ref)
    if e1 > 1e-9:
        assert e2 / e1 == pytest.approx(0.25, abs=0.05)
