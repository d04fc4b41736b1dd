from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from iospec.lexer import IOLSyntaxError, parse_value, tokenize
from iospec.syntax import (
    FALSE, NIL, TRUE, UNIT, App, Char, Decomposition, Inl, Inr, Int, IsValue, Lam, Pair,
    Prim, Var, decompose, eval_prim, is_data, list_items, make_list, make_string, plug,
    show_value, substitute,
)

# Data values: the first-order fragment that round-trips through literals.
data_values = st.recursive(
    st.one_of(
        st.just(UNIT),
        st.integers(-(2**40), 2**40).map(Int),
        st.characters(codec="ascii").map(Char),
    ),
    lambda inner: st.one_of(
        inner.map(Inl), inner.map(Inr), st.tuples(inner, inner).map(lambda p: Pair(*p)),
    ),
    max_leaves=8,
)


@given(data_values)
def test_show_parse_round_trip(v):
    assert parse_value(show_value(v)) == v


@given(st.text(alphabet=st.characters(codec="ascii"), max_size=8))
def test_string_round_trip(s):
    v = make_string(s)
    assert [c.c for c in list_items(v)] == list(s)
    assert parse_value(show_value(v)) == v


def test_nil_and_true_coincide():
    # Lists and booleans share their sum encoding.
    assert NIL == TRUE
    assert show_value(make_list([])) == "true"


@given(data_values)
def test_data_values_are_data(v):
    assert is_data(v)
    assert not is_data(Pair(v, Lam("x", Var("x"))))


def test_substitution_avoids_capture():
    # (fun y -> x y)[y/x] must not capture the free y.
    e = Lam("y", App(Var("x"), Var("y")))
    out = substitute(e, "x", Var("y"))
    assert isinstance(out, Lam) and out.var != "y"
    assert out.body == App(Var("y"), Var(out.var))


def test_substitution_respects_shadowing():
    e = Lam("x", Var("x"))
    assert substitute(e, "x", Int(1)) is e


names = st.sampled_from(["x", "y", "z"])
terms = st.recursive(
    st.one_of(names.map(Var), st.integers(0, 3).map(Int)),
    lambda inner: st.one_of(
        st.tuples(names, inner).map(lambda p: Lam(*p)),
        st.tuples(inner, inner).map(lambda p: App(*p)),
        st.tuples(inner, inner).map(lambda p: Pair(*p)),
    ),
    max_leaves=10,
)


@given(terms, names, terms)
def test_substitution_free_variables(e, x, v):
    out = substitute(e, x, v)
    expected = (e.fv - {x}) | (v.fv if x in e.fv else frozenset())
    assert out.fv == expected


@given(terms, names)
def test_substitution_identity(e, x):
    assert substitute(e, x, Var(x)).fv == e.fv


def test_decompose_plug_round_trip():
    e = Pair(App(Lam("x", Var("x")), Int(1)), Prim("+", Int(1), Int(2)))
    d = decompose(e)
    assert isinstance(d, Decomposition)
    assert d.head == App(Lam("x", Var("x")), Int(1))
    assert plug(d.context, d.head) == e
    assert isinstance(decompose(Pair(Int(1), Int(2))), IsValue)


def test_decompose_reduces_one_component():
    e = Pair(Prim("+", Int(1), Int(1)), Prim("+", Int(2), Int(2)))
    d = decompose(e)
    assert d.head in (e.a, e.b)
    assert plug(d.context, d.head) == e


def test_eval_prim():
    assert eval_prim("+", Int(2), Int(3)) == Int(5)
    assert eval_prim("-", Char("c"), Char("a")) == Int(2)
    assert eval_prim("+", Int(2), Char("A")) == Char("C")
    assert eval_prim("=", Int(1), Int(1)) == TRUE
    assert eval_prim("<", Int(2), Int(1)) == FALSE
    assert eval_prim("+", Int(1), UNIT) is None


def test_lexer_positions():
    with pytest.raises(IOLSyntaxError) as exc:
        tokenize("let x :=\n  'ab'")
    assert (exc.value.line, exc.value.col) == (2, 3)
