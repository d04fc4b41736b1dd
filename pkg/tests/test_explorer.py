from __future__ import annotations

import json

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from iospec.explorer import (
    Property, StateBudgetExceeded, canonical_config, canonical_key,
    explore, replay, report_json, report_text,
)
from iospec.interp import Config
from iospec.monitor import (
    Failure, Ok, ScriptEnv, SeededRandom, initial_spec_state, monitored_run, parse_env,
)
from iospec.syntax import Int, Loc, Pair

from conftest import corpus_names, load, program
from oracles import naive_outcomes


def test_cat2_safe_with_branching():
    rep = explore(*load("cat2"), depth=32)
    assert rep.safe
    assert rep.stats.env_branches >= 4 and rep.stats.schedule_branches >= 2


def test_hi_wrong_counterexample_replays():
    prog, net = load("hi_wrong")
    rep = explore(prog, net)
    assert not rep.safe and rep.exit_code == 1
    res = replay(prog, net, rep.counterexample)
    assert res.verdict.describe() == rep.counterexample.verdict.describe()


def test_assert_false_counterexample_replays():
    prog, net = load("assert_false")
    rep = explore(prog, net)
    assert isinstance(rep.counterexample.verdict, Failure)
    assert isinstance(replay(prog, net, rep.counterexample).verdict, Failure)


def test_racy_assertion_found_and_replayed():
    prog, net = program(
        "let c := ref 0 in fork (c <- 1); assert(!c = 0)"
    )
    rep = explore(prog, net)
    assert not rep.safe
    res = replay(prog, net, rep.counterexample)
    assert isinstance(res.verdict, Failure)


def test_cas_terminal_heaps():
    rep = explore(*load("cas_incr"), collect_terminals=True)
    assert rep.safe and rep.terminal_heaps == {(Int(2),)}


def test_state_budget():
    with pytest.raises(StateBudgetExceeded):
        explore(*load("cat2"), depth=32, max_states=3)


def test_depth_bound_counts_frontier():
    # With deduplication the periodic loop closes on itself; without it
    # the search is cut at the depth bound.
    rep = explore(*load("cat"), depth=10, dedup=False)
    assert rep.safe and rep.stats.frontier > 0
    rep = explore(*load("cat"), depth=10)
    assert rep.safe and rep.stats.dedup_hits > 0


@pytest.mark.parametrize("case", ["cat2", "cas_incr", "pvar_race", "hi_wrong", "buffered_start"])
def test_dedup_agrees_with_plain_search(case):
    prog, net = load(case)
    a = explore(prog, net, depth=40, collect_terminals=True)
    b = explore(prog, net, depth=40, dedup=False, collect_terminals=True)
    assert a.safe == b.safe
    assert a.terminal_heaps == b.terminal_heaps
    assert b.stats.dedup_hits == 0 and b.stats.states >= a.stats.states


@pytest.mark.parametrize("case", ["cat2", "cas_incr", "hi_wrong", "assert_false", "chat"])
def test_parallel_matches_sequential(case):
    prog, net = load(case)
    a = explore(prog, net, collect_terminals=True)
    b = explore(prog, net, collect_terminals=True, workers=4)
    assert a.safe == b.safe and a.terminal_heaps == b.terminal_heaps
    if not a.safe:
        assert a.counterexample.branch == b.counterexample.branch


def test_reports_are_byte_stable():
    prog, net = load("cat2")
    a, b = explore(prog, net, depth=32), explore(prog, net, depth=32)
    assert report_json(a) == report_json(b) and report_text(a) == report_text(b)
    doc = json.loads(report_json(a))
    assert doc["schema"] == "iospec.report/1" and doc["result"] == "SafeUpToDepth"


def test_canonical_key_ignores_allocation_order():
    spec = initial_spec_state(load("hi")[1])
    a = Config((Pair(Loc(0), Loc(1)),), (Int(1), Int(2)))
    b = Config((Pair(Loc(1), Loc(0)),), (Int(2), Int(1)))
    assert canonical_config(a) == canonical_config(b)
    assert canonical_key(a, spec) == canonical_key(b, spec)
    c = Config((Pair(Loc(0), Loc(1)),), (Int(2), Int(1)))
    assert canonical_key(a, spec) != canonical_key(c, spec)


class CountWrites(Property):
    name = "at-most-one-output"

    def initial(self):
        return 0

    def step(self, state, label):
        state += 1
        return "two outputs" if state > 1 else state


def test_property_violation():
    prog, net = load("hi")
    rep = explore(prog, net, prop=CountWrites())
    assert not rep.safe
    assert rep.counterexample.verdict.describe() == "PropertyViolation: two outputs"


# Random two-thread programs over shared cells: the explorer (coalesced
# local steps, deduplication) must agree with the naive interleaving oracle.
ops = st.one_of(
    st.tuples(st.just("set"), st.sampled_from("ab"), st.integers(0, 2)),
    st.tuples(st.just("cas"), st.sampled_from("ab"), st.integers(0, 2), st.integers(0, 2)),
    st.tuples(st.just("check"), st.sampled_from("ab"), st.integers(0, 2)),
    st.tuples(st.just("copy"), st.sampled_from("ab"), st.sampled_from("ab")),
)


def render(op) -> str:
    kind = op[0]
    if kind == "set":
        return f"{op[1]} <- {op[2]}"
    if kind == "cas":
        return f"cas({op[1]}, {op[2]}, {op[3]})"
    if kind == "check":
        return f"assert(!{op[1]} <= {op[2]})"
    return f"{op[1]} <- !{op[2]}"


def render_program(t1, t2) -> str:
    body1 = "; ".join(render(o) for o in t1) or "()"
    body2 = "; ".join(render(o) for o in t2) or "()"
    return f"let a := ref 0 in let b := ref 0 in fork ({body1}); {body2}"


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(ops, max_size=3), st.lists(ops, max_size=3))
def test_explorer_matches_naive_oracle(t1, t2):
    prog, net = program(render_program(t1, t2))
    failed, terminals = naive_outcomes(prog, net)
    rep = explore(prog, net, depth=64, collect_terminals=True)
    assert rep.safe == (not failed)
    if rep.safe:
        assert rep.terminal_heaps == terminals
    else:
        assert isinstance(replay(prog, net, rep.counterexample).verdict, Failure)


@settings(max_examples=30, deadline=None)
@given(st.lists(ops, max_size=3), st.lists(ops, max_size=3), st.integers(0, 1000))
def test_safe_implies_monitor_ok(t1, t2, seed):
    prog, net = program(render_program(t1, t2))
    rep = explore(prog, net, depth=64)
    if rep.safe:
        assert isinstance(monitored_run(prog, net, schedule=SeededRandom(seed)).verdict, Ok)


def test_safe_cat2_implies_monitor_ok_for_all_inputs():
    prog, net = load("cat2")
    assert explore(prog, net, depth=32).safe
    for a in "ab":
        for b in "ab":
            env = ScriptEnv(parse_env(f"getchar '{a}'\ngetchar '{b}'\n"))
            assert isinstance(monitored_run(prog, net, env=env).verdict, Ok)


# The chat cases busy-wait, so their plain search grows quickly; depth 16
# agrees as well but takes over a minute.
DEDUP_DEPTH = {"chat": 10, "chat_stack": 10}


@pytest.mark.parametrize("case", corpus_names())
def test_dedup_verdicts_agree_on_corpus(case):
    prog, net = load(case)
    depth = DEDUP_DEPTH.get(case, 16)
    a = explore(prog, net, depth=depth)
    b = explore(prog, net, depth=depth, dedup=False)
    assert a.safe == b.safe
    if not a.safe:
        assert a.counterexample.verdict.describe() == b.counterexample.verdict.describe()
