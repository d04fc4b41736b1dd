"""Runtime monitoring: a program runs against a net, and every I/O step is
checked against (and advances) the specification state."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from iospec import interp
from iospec.interp import Config, initial_config, redex
from iospec.lexer import IOLSyntaxError, parse_value
from iospec.petri import (
    Marking, Net, fire_io, horizon_open, show_action,
    show_marking, silent_closure, sort_results, sorted_markings,
)
from iospec.syntax import Expr, show_args, show_value, sort_key

DEFAULT_FUEL = 100_000
DEFAULT_BOUND = 64
LOCAL_LIMIT = 10_000


# ---------------------------------------------------------------------------
# Specification state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpecState:
    """A closed set of candidate markings: the computable derivative of the
    net's trace set after the actions observed so far."""

    net: Net
    markings: frozenset
    bound: int = DEFAULT_BOUND
    truncated: bool = False

    def sorted(self) -> list[Marking]:
        return sorted_markings(self.markings)

    def __str__(self) -> str:
        return "{" + ", ".join(show_marking(m) for m in self.sorted()) + "}"


def initial_spec_state(net: Net, bound: int = DEFAULT_BOUND) -> SpecState:
    closed, truncated = silent_closure(net, [net.init], bound)
    return SpecState(net, closed, bound, truncated)


_allowed_cache: dict = {}


def allowed_results(s: SpecState, tag: str, arg: Expr) -> dict:
    """{result: SpecState after tag(arg) -> result}, canonically ordered."""
    key = (s.net, s.markings, s.bound, tag, arg)
    hit = _allowed_cache.get(key)
    if hit is not None:
        return hit
    out = {}
    for res, ms in sort_results(fire_io(s.net, s.markings, tag, arg)).items():
        closed, truncated = silent_closure(s.net, ms, s.bound)
        out[res] = SpecState(s.net, closed, s.bound, truncated)
    if len(_allowed_cache) > 200_000:
        _allowed_cache.clear()
    _allowed_cache[key] = out
    return out


def is_open(s: SpecState, tag: str, arg: Expr) -> bool:
    """The action is admitted, but its results lie beyond the net's horizon."""
    return horizon_open(s.net, s.markings, tag, arg)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    trace: tuple

    exit_code = 0
    name = "Verdict"

    def describe(self) -> str:
        return self.name


@dataclass(frozen=True)
class Ok(Verdict):
    spec: SpecState | None = None

    exit_code = 0
    name = "Ok"

    def describe(self) -> str:
        if self.spec is None:
            return "Ok"
        return f"Ok; final markings {self.spec}"


@dataclass(frozen=True)
class ProgramViolation(Verdict):
    tag: str = ""
    arg: Expr | None = None
    thread: int = 0

    exit_code = 1
    name = "ProgramViolation"

    def describe(self) -> str:
        return f"ProgramViolation: thread {self.thread} performs {self.tag}({show_args(self.arg)}), which the specification does not allow"


@dataclass(frozen=True)
class EnvironmentViolation(Verdict):
    tag: str = ""
    arg: Expr | None = None
    result: Expr | None = None
    allowed: tuple = ()

    exit_code = 2
    name = "EnvironmentViolation"

    def describe(self) -> str:
        allowed = ", ".join(show_value(v) for v in self.allowed)
        return (f"EnvironmentViolation: {self.tag}({show_args(self.arg)}) returned "
                f"{show_value(self.result)}; allowed: {allowed}")


@dataclass(frozen=True)
class Failure(Verdict):
    thread: int = 0
    reason: str = ""

    exit_code = 3
    name = "Failure"

    def describe(self) -> str:
        return f"Failure: thread {self.thread} is stuck ({self.reason})"


@dataclass(frozen=True)
class FuelExhausted(Verdict):
    reason: str = "fuel exhausted"

    exit_code = 5
    name = "FuelExhausted"

    def describe(self) -> str:
        return f"FuelExhausted: {self.reason}"


def observe(s: SpecState, tag: str, arg: Expr, result: Expr, trace: tuple = ()):
    """Advance `s` by one observed action, or classify the violation."""
    allowed = allowed_results(s, tag, arg)
    if not allowed:
        return ProgramViolation(trace, tag, arg)
    if result not in allowed:
        return EnvironmentViolation(trace, tag, arg, result, tuple(allowed))
    return allowed[result]


def accepts_trace(s: SpecState, trace: Iterable[tuple]) -> bool:
    for tag, arg, res in trace:
        nxt = observe(s, tag, arg, res)
        if not isinstance(nxt, SpecState):
            return False
        s = nxt
    return True


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


class Env:
    """Source of I/O results. `auto_resolve` environments are not asked
    when the specification allows exactly one result."""

    auto_resolve = True

    def peek(self, tag: str, arg: Expr, allowed: dict) -> Expr | None:
        raise NotImplementedError

    def consume(self, tag: str) -> None:
        pass


class ScriptEnv(Env):
    """Finite script of results, consumed first-in first-out per tag."""

    def __init__(self, entries: Iterable[tuple[str, Expr]] = ()):
        self.queues: dict[str, deque] = {}
        for tag, value in entries:
            self.queues.setdefault(tag, deque()).append(value)

    def peek(self, tag, arg, allowed):
        q = self.queues.get(tag)
        return q[0] if q else None

    def consume(self, tag):
        self.queues[tag].popleft()


def parse_env(text: str) -> list[tuple[str, Expr]]:
    """Env script: one `tag literal` per line; blank lines and comments skipped."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", "//")):
            continue
        parts = stripped.split(None, 1)
        if len(parts) != 2:
            raise IOLSyntaxError("expected `tag literal`", lineno, 1)
        try:
            value = parse_value(parts[1])
        except IOLSyntaxError as exc:
            raise IOLSyntaxError(exc.message, lineno, exc.col + len(parts[0]) + 1) from None
        out.append((parts[0], value))
    return out


class StreamEnv(Env):
    """Interactive supply: one literal per request, read from a stream."""

    def __init__(self, stream, prompt=None):
        self.stream = stream
        self.prompt = prompt
        self.pending: Expr | None = None
        self.closed = False

    def peek(self, tag, arg, allowed):
        if self.pending is None and not self.closed:
            if self.prompt:
                self.prompt(f"{tag}({show_args(arg)}) ? ")
            line = self.stream.readline()
            if not line:
                self.closed = True
                return None
            self.pending = parse_value(line.strip())
        return self.pending

    def consume(self, tag):
        self.pending = None


class ReplayEnv(Env):
    """Results in the order the I/O steps happen (counterexample replay)."""

    auto_resolve = False

    def __init__(self, results: Iterable[Expr]):
        self.results = deque(results)

    def peek(self, tag, arg, allowed):
        return self.results[0] if self.results else None

    def consume(self, tag):
        self.results.popleft()


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


class Schedule:
    def pick(self, enabled: list[int]) -> int | None:
        raise NotImplementedError


class RoundRobin(Schedule):
    def __init__(self):
        self.last = -1

    def pick(self, enabled):
        if not enabled:
            return None
        later = [i for i in enabled if i > self.last]
        self.last = later[0] if later else enabled[0]
        return self.last


class SeededRandom(Schedule):
    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def pick(self, enabled):
        if not enabled:
            return None
        return enabled[self.rng.randrange(len(enabled))]


class ReplaySchedule(Schedule):
    def __init__(self, choices: Iterable[int]):
        self.choices = deque(choices)

    def pick(self, enabled):
        if not self.choices:
            return None
        i = self.choices.popleft()
        return i if i in enabled else None


def make_schedule(policy: str = "round-robin", seed: int = 0) -> Schedule:
    if policy in ("round-robin", "rr"):
        return RoundRobin()
    if policy in ("random", "seeded-random"):
        return SeededRandom(seed)
    raise ValueError(f"unknown schedule policy {policy!r}")


# ---------------------------------------------------------------------------
# Monitored runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    verdict: Verdict
    config: Config
    spec: SpecState
    steps: int
    warnings: list[str] = field(default_factory=list)

    @property
    def trace(self) -> tuple:
        return self.verdict.trace

    @property
    def exit_code(self) -> int:
        return self.verdict.exit_code


def normalize(cfg: Config, indices: Iterable[int], limit: int = LOCAL_LIMIT) -> tuple[Config, int]:
    """Run the LOCAL steps of the given threads eagerly."""
    total = 0
    for i in indices:
        cfg, n = interp.run_local(cfg, i, limit)
        total += n
    return cfg, total


def check_failed(cfg: Config, spec: SpecState, trace: tuple) -> Verdict | None:
    """The verdict for a failed configuration, if some thread has failed."""
    for i, e in enumerate(cfg.threads):
        r = redex(e)
        if r.kind == interp.VALUE:
            continue
        if r.kind == interp.IO:
            tag, arg = r.head.tag, r.head.e
            if not allowed_results(spec, tag, arg) and not is_open(spec, tag, arg):
                return ProgramViolation(trace, tag, arg, i)
            continue
        bad = interp.failed_thread(Config((e,), cfg.heap, cfg.pvars))
        if bad is not None:
            reason = "no rule applies"
            try:
                interp.thread_step(cfg, i)
            except interp.StuckThread as exc:
                reason = exc.reason
            except Exception:
                pass
            return Failure(trace, i, reason)
    return None


def monitored_run(program: Expr, net: Net, env: Env | None = None,
                  schedule: Schedule | None = None, fuel: int = DEFAULT_FUEL,
                  bound: int = DEFAULT_BOUND, coalesce: bool = False,
                  on_step: Callable | None = None) -> RunResult:
    """Run `program` under the monitoring semantics.

    With `coalesce`, each scheduled step is one visible step followed by the
    thread's pure local steps (the explorer's step granularity).
    """
    env = env if env is not None else ScriptEnv()
    schedule = schedule if schedule is not None else RoundRobin()
    spec = initial_spec_state(net, bound)
    warnings: list[str] = []
    if spec.truncated:
        warnings.append(f"silent closure truncated at {bound} steps")
    cfg = initial_config(program)
    trace: tuple = ()
    steps = 0
    if coalesce:
        cfg, n = normalize(cfg, range(len(cfg.threads)))
        steps += n

    def done(v: Verdict) -> RunResult:
        return RunResult(v, cfg, spec, steps, warnings)

    while True:
        failed = check_failed(cfg, spec, trace)
        if failed is not None:
            return done(failed)
        if cfg.finished:
            return done(Ok(trace, spec))
        if steps >= fuel:
            return done(FuelExhausted(trace, "fuel exhausted"))
        blocked: set[int] = set()
        while True:
            enabled = [i for i, e in enumerate(cfg.threads) if not e.is_value and i not in blocked]
            i = schedule.pick(enabled)
            if i is None:
                reason = "all threads blocked" if enabled or blocked else "schedule ended"
                if isinstance(schedule, ReplaySchedule):
                    reason = "replay schedule ended"
                return done(FuelExhausted(trace, reason))
            r = redex(cfg.threads[i])
            result = None
            if r.kind == interp.IO:
                tag, arg = r.head.tag, r.head.e
                allowed = allowed_results(spec, tag, arg)
                if not allowed:
                    blocked.add(i)  # beyond the horizon
                    continue
                if len(allowed) == 1 and env.auto_resolve:
                    result = next(iter(allowed))
                else:
                    result = env.peek(tag, arg, allowed)
                    if result is None:
                        blocked.add(i)
                        continue
                    env.consume(tag)
                    if result not in allowed:
                        return done(EnvironmentViolation(trace, tag, arg, result, tuple(allowed)))
                spec_next = allowed[result]
                if spec_next.truncated and f"silent closure truncated at {bound} steps" not in warnings:
                    warnings.append(f"silent closure truncated at {bound} steps")
            try:
                if coalesce and r.kind == interp.LOCAL:
                    cfg, n = interp.run_local(cfg, i, LOCAL_LIMIT)
                    steps += n
                    break
                step = interp.thread_step(cfg, i, result)
            except interp.Blocked:
                blocked.add(i)
                continue
            except interp.StuckThread as exc:
                return done(Failure(trace, exc.index, exc.reason))
            old_len = len(cfg.threads)
            cfg = step.config
            steps += 1
            if step.label is not None:
                trace += (step.label,)
                spec = spec_next
            if coalesce:
                forked = len(cfg.threads) - old_len
                cfg, n = normalize(cfg, range(i, i + 1 + forked))
                steps += n
            if on_step is not None:
                on_step(i, step)
            break


def format_trace(trace: tuple) -> list[str]:
    return [show_action(a) for a in trace]


def verdict_sort_key(v: Verdict) -> tuple:
    return (v.exit_code, tuple((t, sort_key(a), sort_key(r)) for t, a, r in v.trace))
