from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from iospec import prophecy
from iospec.prophecy import (
    EMPTY, ConstraintBlocked, ProphecyMismatch, UnknownIdentifier, Universal,
    accepts, accepts_prefix, assign_pvar_step, create_pvar_step, interleave, literal,
    nonempty, nullable, parse_constraint, residual, show_constraint,
)
from iospec.syntax import TRUE, FALSE, Int, PVarId

from oracles import ALPHABET, constraint_law_mismatches, merges

seqs = st.lists(st.sampled_from(ALPHABET), max_size=3).map(tuple)


def test_constraint_laws_exhaustive_small():
    bad, checks = constraint_law_mismatches(max_len=3)
    assert checks > 0 and bad == 0


@given(seqs, seqs, seqs)
def test_interleave_membership(a, b, q):
    c = interleave(literal(a), literal(b))
    assert accepts(c, q) == (q in merges(a, b))


@given(st.lists(seqs, max_size=3), seqs)
def test_literal_set_membership(members, q):
    c = literal(*members)
    assert accepts(c, q) == (q in members)
    assert nonempty(c) == bool(members)


@given(st.lists(seqs, min_size=1, max_size=3), seqs, st.sampled_from(ALPHABET))
def test_residual_law(members, q, v):
    # v.q in C  <=>  q in C[v]
    c = literal(*members)
    assert accepts(residual(c, v), q) == accepts(c, (v,) + q)


@given(seqs, seqs, seqs)
def test_prefix_acceptance_is_prefix_closed(a, b, q):
    c = interleave(literal(a), literal(b))
    if accepts_prefix(c, q):
        assert all(accepts_prefix(c, q[:k]) for k in range(len(q)))


def test_open_ended_literal():
    c = literal((Int(1),), open_ended=True)
    assert accepts(c, (Int(1), Int(2), Int(0)))
    assert not accepts(c, (Int(2),))
    assert accepts_prefix(c, ())


def test_universal_and_empty():
    assert accepts(Universal(), (Int(5), Int(6)))
    assert not nonempty(EMPTY)
    assert nullable(literal(()))


@pytest.mark.parametrize("text", [
    "any",
    "lit{[true, false]}",
    "interleave(lit{[1]}, lit{[2, 3]})",
])
def test_constraint_show_parse_round_trip(text):
    c = parse_constraint(text)
    assert parse_constraint(show_constraint(c)) == c


def test_cpvar_steps():
    c = literal((TRUE, FALSE))
    st_, pid = create_pvar_step((), c)
    st_ = assign_pvar_step(st_, pid, TRUE)
    assert st_[0].live and st_[0].history == (TRUE,)
    with pytest.raises(ConstraintBlocked):
        assign_pvar_step(st_, pid, TRUE)
    st_ = assign_pvar_step(st_, pid, FALSE)
    assert accepts(st_[0].constraint, ())


def test_simple_pvar_is_assigned_once():
    st_, pid = create_pvar_step((), None)
    st_ = assign_pvar_step(st_, pid, Int(1))
    assert not st_[0].live
    with pytest.raises(UnknownIdentifier):
        assign_pvar_step(st_, pid, Int(1))
    with pytest.raises(UnknownIdentifier):
        assign_pvar_step((), PVarId(0), Int(1))


def test_prophecy_must_match():
    st_, pid = create_pvar_step((), Universal(), (Int(1), Int(2)))
    with pytest.raises(ProphecyMismatch):
        assign_pvar_step(st_, pid, Int(2))
    st_ = assign_pvar_step(st_, pid, Int(1))
    assert st_[0].prophecy == (Int(2),)
    assert prophecy.erase_prophecies(st_)[0].prophecy is None


def test_unsatisfiable_constraint_rejected():
    with pytest.raises(prophecy.UnsatisfiableConstraint):
        create_pvar_step((), EMPTY)
