from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from iospec.petri import (
    ClosureTruncated, NetError, Place, ResDetCounterexample, ResDetOk, check_result_det,
    enabled_actions, fire_io, horizon_open, io_successors, is_prefix_closed, marking,
    marking_union, parse_net, show_marking, silent_closure, token_delta, traces_upto,
)
from iospec.syntax import UNIT, Char

from conftest import corpus_names, load
from oracles import trace_oracle_mismatches

HI = """
tags putchar;
init p1;
io putchar(p1, 'h', unit, p2);
io putchar(p2, 'i', unit, p3);
"""

SPLIT_JOIN = """
tags a, b;
init p;
split(p, q, r);
io a(q, unit, unit, q2);
io b(r, unit, unit, r2);
join(q2, r2, done);
"""


def P(name, *args):
    return Place(name, tuple(args))


def test_hi_io_successors():
    net = parse_net(HI)
    assert net.init == (P("p1"),)
    assert io_successors(net, [net.init], "putchar", Char("h")) == {UNIT: frozenset({(P("p2"),)})}
    assert io_successors(net, [net.init], "putchar", Char("i")) == {}
    with pytest.raises(NetError):
        io_successors(net, [net.init], "getchar", UNIT)


def test_split_join_closure_and_traces():
    net = parse_net(SPLIT_JOIN)
    closed, trunc = silent_closure(net, [net.init])
    assert not trunc
    assert closed == frozenset({(P("p"),), marking([P("q"), P("r")])})
    traces = traces_upto(net, net.init, 2)
    a, b = ("a", UNIT, UNIT), ("b", UNIT, UNIT)
    assert traces == {(), (a,), (b,), (a, b), (b, a)}
    assert is_prefix_closed(traces)


def test_token_accounting():
    net = parse_net(SPLIT_JOIN)
    deltas = {r.kind: token_delta(r) for r in net.rules}
    assert deltas == {"split": 1, "io": 0, "join": -1}


def test_firing_preserves_untouched_tokens():
    net = parse_net(SPLIT_JOIN)
    m = marking([P("q"), P("r"), P("extra")])
    out = fire_io(net, [m], "a", UNIT)
    assert out == {UNIT: {marking([P("q2"), P("r"), P("extra")])}}


def test_term_places_and_patterns():
    net = parse_net(
        "tags putchar; init pc(\"ab\");"
        "io putchar(pc(C :: Cs), C, unit, pc(Cs));"
    )
    traces = traces_upto(net, net.init, 3)
    assert max(len(t) for t in traces) == 2
    assert (("putchar", Char("a"), UNIT), ("putchar", Char("b"), UNIT)) in traces


def test_guards_enumerate_results():
    (_, net) = load("toupper")
    res = io_successors(net, [net.init], "getchar", UNIT)
    assert list(res) == [Char(c) for c in "abcdefghijklmnopqrstuvwxyz"]


def test_open_horizon():
    net = parse_net("tags recv; init r([]); open recv(r([]), unit);")
    assert horizon_open(net, [net.init], "recv", UNIT)
    assert io_successors(net, [net.init], "recv", UNIT) == {}


def test_closure_truncation():
    net = parse_net("tags t; init c(0); noop(c(N), c(N + 1));")
    _, trunc = silent_closure(net, [net.init], bound=5)
    assert trunc
    with pytest.raises(ClosureTruncated):
        io_successors(net, [net.init], "t", UNIT, bound=5)


@pytest.mark.parametrize("text, msg", [
    ("tags t; init p; io t(p, unit, unit, q(D));", "not bound"),
    ("tags t; init p; io u(p, unit, unit, q);", "u"),
    ("tags t; init p; io t(p, unit, unit);", ""),
])
def test_load_time_errors(text, msg):
    with pytest.raises(NetError) as exc:
        parse_net(text)
    assert msg in str(exc.value)
    assert exc.value.line == 1


def test_result_determinism():
    assert isinstance(check_result_det(parse_net(HI), (P("p1"),)), ResDetOk)
    _, net = load("toupper")
    cex = check_result_det(net, net.init)
    assert isinstance(cex, ResDetCounterexample)
    assert cex.tag == "getchar" and cex.trace == ()
    assert (cex.result1, cex.result2) == (Char("a"), Char("b"))


@pytest.mark.parametrize("case", corpus_names())
def test_corpus_nets_prefix_closed_and_oracle(case):
    _, net = load(case)
    assert is_prefix_closed(traces_upto(net, net.init, 4))
    bad, checks = trace_oracle_mismatches(net, 4)
    assert checks > 0 and bad == 0


places = st.builds(Place, st.sampled_from("pqr"))
markings_ = st.lists(places, max_size=4).map(marking)


@given(markings_, markings_)
def test_marking_union_is_commutative_multiset(a, b):
    u = marking_union(a, b)
    assert u == marking_union(b, a)
    assert len(u) == len(a) + len(b)
    for p in set(u):
        assert u.count(p) == a.count(p) + b.count(p)


@given(markings_)
def test_marking_is_canonical(m):
    assert marking(reversed(m)) == m
    assert show_marking(m).startswith("{")


@given(st.integers(0, 3), st.integers(0, 3))
def test_split_join_counts(nq, nr):
    # Each firing changes the token count by exactly the rule's delta.
    net = parse_net(SPLIT_JOIN)
    m = marking([P("q2")] * nq + [P("r2")] * nr)
    for new in silent_closure(net, [m], bound=8)[0]:
        joins = (len(m) - len(new))
        assert 0 <= joins <= min(nq, nr)
        assert new.count(P("done")) == joins


def test_enabled_actions_on_empty_marking():
    assert list(enabled_actions(parse_net(HI), ())) == []


def test_cat_net_is_periodic():
    _, net = load("cat")
    # Input and output each follow "catcat..." independently.
    period = [Char(c) for c in "catcat"]
    for tr in traces_upto(net, net.init, 6):
        ins = [a[2] for a in tr if a[0] == "getchar"]
        outs = [a[1] for a in tr if a[0] == "putchar"]
        assert ins == period[: len(ins)] and outs == period[: len(outs)]
