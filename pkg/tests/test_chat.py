from __future__ import annotations

import pytest

from iospec.chat import (
    ChatOrder, channel_constraint, chat_net, chat_program, explore_chat, interleavings,
    quote, quoted,
)
from iospec.erasure import erasure_check
from iospec.explorer import PropertyViolation
from iospec.parser import parse_program
from iospec.petri import parse_net
from iospec.prophecy import parse_constraint
from iospec.syntax import UNIT, Pair, make_string

from conftest import CORPUS_DIR

ONE_EACH = {"n1": ["a"], "n2": ["b"]}


def test_quote():
    assert quote("n1", "hi") == "n1 says 'hi'"
    assert quoted(ONE_EACH) == (("n1 says 'a'",), ("n2 says 'b'",))


def test_interleavings():
    assert interleavings(("a",), ("b",)) == [("a", "b"), ("b", "a")]
    assert len(interleavings(("a", "b"), ("c",))) == 3


def test_generated_files_parse_and_match_corpus():
    net = parse_net(chat_net(ONE_EACH))
    parse_program(chat_program(ONE_EACH), tags=net.tags)
    assert (CORPUS_DIR / "chat" / "prog.iol").read_text() == chat_program(ONE_EACH)
    assert (CORPUS_DIR / "chat" / "spec.net").read_text() == chat_net(ONE_EACH)


def test_chat_safe_and_orders_are_interleavings():
    res = explore_chat(ONE_EACH, depth=64)
    assert res.report.safe
    expected = {tuple(make_string(m) for m in mu) for mu in interleavings(*quoted(ONE_EACH))}
    orders = res.complete_orders
    assert orders
    for per_member in orders:
        assert per_member[0] == per_member[1]
        assert per_member[0] in expected
    assert {o[0] for o in orders} == expected


def test_chat_without_messages():
    res = explore_chat({"n1": [], "n2": []}, depth=32)
    assert res.report.safe


def test_stack_mutant_blocks_on_the_constraint():
    res = explore_chat({"n1": ["a", "c"], "n2": []}, depth=64, channel="stack")
    assert res.report.safe
    assert res.report.stats.constraint_blocked > 0


def test_stack_mutant_fails_the_order_property():
    res = explore_chat({"n1": ["a", "c"], "n2": []}, depth=64, channel="stack",
                       constrained=False, permissive=True)
    v = res.report.counterexample.verdict
    assert isinstance(v, PropertyViolation)
    assert "not an interleaving" in v.message


def test_order_property_rejects_divergence():
    prop = ChatOrder(parse_constraint(channel_constraint(ONE_EACH)))
    a, b = make_string("n1 says 'a'"), make_string("n2 says 'b'")
    s = prop.initial()
    s = prop.step(s, ("sendToNick", Pair(make_string("n1"), a), UNIT))
    assert isinstance(s, tuple)
    out = prop.step(s, ("sendToNick", Pair(make_string("n2"), b), UNIT))
    assert isinstance(out, str) and "different orders" in out


def test_chat_channel_erasure():
    net = parse_net(chat_net(ONE_EACH))
    prog = parse_program(chat_program(ONE_EACH), tags=net.tags)
    domain = tuple(make_string(q) for qs in quoted(ONE_EACH) for q in qs)
    rep = erasure_check(prog, net, domain, prefix=2, depth=64)
    assert rep.ok and rep.nomatch_exercised


def test_unknown_channel():
    with pytest.raises(ValueError):
        chat_program(ONE_EACH, channel="bag")
