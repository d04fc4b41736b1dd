from __future__ import annotations

import io

import pytest
from hypothesis import given, settings, strategies as st

from iospec.lexer import IOLSyntaxError
from iospec.monitor import (
    EnvironmentViolation, Failure, FuelExhausted, Ok, ProgramViolation, ReplayEnv,
    ScriptEnv, SeededRandom, StreamEnv, accepts_trace, allowed_results, initial_spec_state,
    make_schedule, monitored_run, observe, parse_env,
)
from iospec.petri import parse_net, traces_upto
from iospec.syntax import UNIT, Char, Int

from conftest import CORPUS_DIR, load, program


def env_of(case: str, name: str) -> ScriptEnv:
    return ScriptEnv(parse_env((CORPUS_DIR / case / name).read_text()))


def test_hi_ok():
    res = monitored_run(*load("hi"))
    assert isinstance(res.verdict, Ok)
    assert res.trace == (("putchar", Char("h"), UNIT), ("putchar", Char("i"), UNIT))
    assert [str(p) for m in res.spec.sorted() for p in m] == ["p3"]


def test_hi_wrong_is_program_violation():
    res = monitored_run(*load("hi_wrong"))
    v = res.verdict
    assert isinstance(v, ProgramViolation) and v.arg == Char("i") and v.exit_code == 1


@pytest.mark.parametrize("c", "abcdefghijklmnopqrstuvwxyz")
def test_toupper_letters(c):
    res = monitored_run(*load("toupper"), env=env_of("toupper", f"{c}.env"))
    assert isinstance(res.verdict, Ok)
    assert res.trace[-1] == ("putchar", Char(c.upper()), UNIT)


def test_toupper_bad_input_is_environment_violation():
    res = monitored_run(*load("toupper"), env=env_of("toupper", "bad.env"))
    v = res.verdict
    assert isinstance(v, EnvironmentViolation) and v.result == Char("1") and v.exit_code == 2
    assert len(v.allowed) == 26


def test_failure_and_fuel():
    assert isinstance(monitored_run(*load("assert_false")).verdict, Failure)
    res = monitored_run(*load("cat"), fuel=500)
    assert isinstance(res.verdict, FuelExhausted) and res.exit_code == 5
    # The partial trace is a member of the net's language.
    _, net = load("cat")
    assert accepts_trace(initial_spec_state(net), res.trace)
    k = min(len(res.trace), 6)
    assert res.trace[:k] in traces_upto(net, net.init, k)


def test_missing_input_blocks():
    res = monitored_run(*load("toupper"), env=ScriptEnv())
    assert isinstance(res.verdict, FuelExhausted)
    assert res.verdict.reason == "all threads blocked"


def test_buffered_output_matches_putchars():
    res = monitored_run(*load("buffered_five"))
    assert isinstance(res.verdict, Ok)
    written = [a[1] for a in res.trace if a[0] == "write_char"]
    assert written == [Char(c) for c in "hello"]
    res = monitored_run(*load("buffered_start"))
    assert isinstance(res.verdict, Ok)


def test_observe_classifies():
    net = parse_net("tags getchar; init p; io getchar(p, unit, C, q) where 'a' <= C <= 'b';")
    s = initial_spec_state(net)
    assert list(allowed_results(s, "getchar", UNIT)) == [Char("a"), Char("b")]
    assert isinstance(observe(s, "getchar", UNIT, Char("c")), EnvironmentViolation)
    assert isinstance(observe(s, "getchar", Int(1), Char("a")), ProgramViolation)


def test_parse_env():
    entries = parse_env("# comment\ngetchar 'a'\n\n// other\nrecv \"hi\"\n")
    assert entries[0] == ("getchar", Char("a"))
    assert entries[1][0] == "recv"
    with pytest.raises(IOLSyntaxError) as exc:
        parse_env("getchar 'a'\ngetchar\n")
    assert exc.value.line == 2


def test_stream_env():
    res = monitored_run(*load("toupper"), env=StreamEnv(io.StringIO("'q'\n")))
    assert res.trace[-1] == ("putchar", Char("Q"), UNIT)


def test_replay_env_asks_even_when_determined():
    prog, net = program("putchar('x')", "tags putchar; init p; io putchar(p, 'x', unit, q);")
    res = monitored_run(prog, net, env=ReplayEnv([Int(3)]))
    assert isinstance(res.verdict, EnvironmentViolation)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_random_schedules_keep_cat2_safe(seed):
    res = monitored_run(*load("cat2"), env=env_of("cat2", "ab.env"), schedule=SeededRandom(seed))
    assert isinstance(res.verdict, Ok)
    assert [a[2] for a in res.trace if a[0] == "getchar"] == [Char("a"), Char("b")]
    assert [a[1] for a in res.trace if a[0] == "putchar"] == [Char("a"), Char("b")]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_runs_are_deterministic_per_seed(seed):
    def run():
        r = monitored_run(*load("cas_incr"), schedule=make_schedule("random", seed))
        return r.verdict.describe(), r.config
    assert run() == run()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_cas_incr_reaches_two_under_any_schedule(seed):
    res = monitored_run(*load("cas_incr"), schedule=SeededRandom(seed))
    assert isinstance(res.verdict, Ok)
    assert res.config.heap[0] == Int(2)


def test_coalesced_run_agrees():
    a = monitored_run(*load("hi"))
    b = monitored_run(*load("hi"), coalesce=True)
    assert a.trace == b.trace and b.steps == a.steps
