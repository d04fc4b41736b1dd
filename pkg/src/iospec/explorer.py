"""Bounded exhaustive exploration of monitored configurations.

Every schedule and every environment result the specification allows is
enumerated depth-first. A step is one visible action of a thread (heap,
I/O, fork or prophecy step) followed by that thread's pure local steps:
local steps touch nothing shared, so running them eagerly loses no
interleaving that could change the outcome, and it keeps desk-scale state
spaces small. Depth therefore counts these coalesced steps.
"""

from __future__ import annotations

import functools
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable

from iospec import interp, prophecy
from iospec.interp import Config, initial_config, redex
from iospec.monitor import (
    EnvironmentViolation, Failure, ProgramViolation,
    LOCAL_LIMIT, ReplayEnv, ReplaySchedule, SpecState, Verdict, allowed_results,
    check_failed, initial_spec_state, monitored_run, normalize,
)
from iospec.petri import ClosureTruncated, Net, show_action
from iospec.syntax import Expr, Loc, show_value, sort_key, with_child

REPORT_SCHEMA = "iospec.report/1"
DEFAULT_DEPTH = 64
DEFAULT_BUDGET = 1_000_000


class StateBudgetExceeded(Exception):
    def __init__(self, states: int):
        super().__init__(f"state budget exceeded after {states} states")
        self.states = states


@dataclass(frozen=True)
class PropertyViolation(Verdict):
    message: str = ""

    exit_code = 1
    name = "PropertyViolation"

    def describe(self) -> str:
        return f"PropertyViolation: {self.message}"


class Property:
    """A safety property observed along each branch. Its state is part of
    the deduplication key, so it must be hashable."""

    name = "property"

    def initial(self):
        return None

    def step(self, state, label: tuple):
        """New state after an I/O action, or a `str` describing a violation."""
        return state

    def terminal(self, state, cfg: Config) -> str | None:
        """Checked when every thread has finished; a `str` is a violation."""
        return None

    def leaf(self, state):
        """What to record about a branch that ends (finished, blocked, cut
        at the depth bound, or merged into an explored state); None records
        nothing."""
        return None

    def show(self, observation) -> str:
        return str(observation)


# ---------------------------------------------------------------------------
# Canonical keys
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=1 << 18)
def _locs(e: Expr) -> tuple[int, ...]:
    """Locations occurring in `e`, in first-occurrence (pre-)order."""
    if isinstance(e, Loc):
        return (e.n,)
    out: list[int] = []
    for child in e.subterms():
        for n in _locs(child):
            if n not in out:
                out.append(n)
    return tuple(out)


@functools.lru_cache(maxsize=1 << 16)
def _rename(e: Expr, mapping: tuple[int, ...]) -> Expr:
    if isinstance(e, Loc):
        return Loc(mapping[e.n])
    if not _locs(e):
        return e
    for name in e.children:
        e = with_child(e, name, _rename(getattr(e, name), mapping))
    return e


def location_order(cfg: Config) -> list[int]:
    """Heap indices in first-use order: threads first, then the cells they
    reach, then unreachable cells in allocation order."""
    order: list[int] = []
    seen: set[int] = set()

    def add(ns):
        for n in ns:
            if n not in seen:
                seen.add(n)
                order.append(n)

    for t in cfg.threads:
        add(_locs(t))
    i = 0
    while i < len(order):
        n = order[i]
        if n < len(cfg.heap):
            add(_locs(cfg.heap[n]))
        i += 1
    add(range(len(cfg.heap)))
    return order


def canonical_config(cfg: Config) -> Config:
    """The configuration with locations renumbered in first-use order."""
    order = location_order(cfg)
    if all(n == i for i, n in enumerate(order)):
        return cfg
    mapping = [0] * max(len(cfg.heap), max(order, default=-1) + 1)
    for new, old in enumerate(order):
        mapping[old] = new
    mp = tuple(mapping)
    heap = [None] * len(cfg.heap)
    for old in range(len(cfg.heap)):
        heap[mp[old]] = _rename(cfg.heap[old], mp)
    threads = tuple(_rename(t, mp) for t in cfg.threads)
    return Config(threads, tuple(heap), cfg.pvars)


def canonical_key(cfg: Config, spec: SpecState, prop=None) -> tuple:
    c = canonical_config(cfg)
    return (spec.markings, c.threads, c.heap, c.pvars, prop)


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    cfg: Config
    spec: SpecState
    prop: object = None
    trace: tuple = ()
    branch: tuple = ()


@dataclass
class Stats:
    states: int = 0
    dedup_hits: int = 0
    max_pool: int = 0
    env_branches: int = 0
    schedule_branches: int = 0
    terminal: int = 0
    frontier: int = 0
    constraint_blocked: int = 0
    nomatch_blocked: int = 0

    def merge(self, other: "Stats") -> None:
        for f in fields(self):
            if f.name == "max_pool":
                self.max_pool = max(self.max_pool, other.max_pool)
            else:
                setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Counterexample:
    branch: tuple   # ((thread index, resolved choice or None), ...)
    trace: tuple
    verdict: Verdict


@dataclass
class Report:
    depth: int
    stats: Stats
    counterexample: Counterexample | None = None
    terminal_heaps: set | None = None
    observations: set | None = None
    prop: Property | None = None

    def show_observations(self) -> list[str]:
        if not self.observations:
            return []
        show = self.prop.show if self.prop is not None else str
        return sorted(show(o) for o in self.observations)

    @property
    def safe(self) -> bool:
        return self.counterexample is None

    @property
    def result(self) -> str:
        return "SafeUpToDepth" if self.safe else "Counterexample"

    @property
    def exit_code(self) -> int:
        return 0 if self.safe else 1


@dataclass
class Options:
    depth: int = DEFAULT_DEPTH
    dedup: bool = True
    closure_bound: int = 64
    max_states: int = DEFAULT_BUDGET
    prop: Property | None = None
    # Instrumented semantics: constraint -> prophecies to branch over.
    prophecies: Callable | None = None
    collect_terminals: bool = False


def _finish(cfg: Config, step: interp.Step, i: int) -> Config:
    forked = len(step.config.threads) - len(cfg.threads)
    out, _ = normalize(step.config, range(i, i + 1 + forked))
    return out


def successors(node: Node, opts: Options, stats: Stats) -> list[tuple[tuple, Node] | tuple[tuple, Verdict]]:
    """Child nodes in canonical branch order: thread index, then result."""
    cfg, spec = node.cfg, node.spec
    out: list = []
    enabled = 0
    for i, e in enumerate(cfg.threads):
        r = redex(e)
        if r.kind == interp.VALUE:
            continue
        if r.kind == interp.IO:
            tag, arg = r.head.tag, r.head.e
            allowed = allowed_results(spec, tag, arg)
            if not allowed:
                continue  # beyond an open horizon: blocked
            enabled += 1
            if len(allowed) > 1:
                stats.env_branches += len(allowed)
            for res, spec2 in allowed.items():
                if spec2.truncated:
                    raise ClosureTruncated(f"silent closure exceeded {opts.closure_bound} steps")
                step = interp.thread_step(cfg, i, res)
                trace = node.trace + (step.label,)
                prop = node.prop
                if opts.prop is not None:
                    prop = opts.prop.step(prop, step.label)
                    if isinstance(prop, str):
                        out.append(((i, res), PropertyViolation(trace, prop)))
                        continue
                out.append(((i, res), Node(_finish(cfg, step, i), spec2, prop, trace, node.branch + ((i, res),))))
            continue
        if r.kind == interp.CREATE_PVAR and opts.prophecies is not None:
            rhos = opts.prophecies(r.head.constraint)
            if rhos:
                enabled += 1
            for rho in rhos:
                try:
                    step = interp.thread_step(cfg, i, prophecy_values=rho)
                except interp.StuckThread as exc:
                    out.append(((i, rho), Failure(node.trace, i, exc.reason)))
                    continue
                out.append(((i, rho), Node(_finish(cfg, step, i), spec, node.prop, node.trace, node.branch + ((i, rho),))))
            continue
        try:
            if r.kind == interp.LOCAL:
                new, _ = interp.run_local(cfg, i, LOCAL_LIMIT)
            else:
                step = interp.thread_step(cfg, i)
                new = _finish(cfg, step, i)
        except interp.Blocked as exc:
            if exc.kind == "constraint":
                stats.constraint_blocked += 1
            else:
                stats.nomatch_blocked += 1
            continue
        except interp.StuckThread as exc:
            out.append(((i, None), Failure(node.trace, i, exc.reason)))
            continue
        enabled += 1
        out.append(((i, None), Node(new, spec, node.prop, node.trace, node.branch + ((i, None),))))
    if enabled > 1:
        stats.schedule_branches += 1
    return out


def root_node(program: Expr, net: Net, opts: Options) -> Node:
    spec = initial_spec_state(net, opts.closure_bound)
    if spec.truncated:
        raise ClosureTruncated(f"silent closure exceeded {opts.closure_bound} steps")
    cfg, _ = normalize(initial_config(program), [0])
    prop = opts.prop.initial() if opts.prop is not None else None
    return Node(cfg, spec, prop)


def _node_verdict(node: Node, opts: Options, stats: Stats) -> Verdict | None:
    v = check_failed(node.cfg, node.spec, node.trace)
    if v is not None:
        return v
    if node.cfg.finished:
        stats.terminal += 1
        if opts.prop is not None:
            msg = opts.prop.terminal(node.prop, node.cfg)
            if msg is not None:
                return PropertyViolation(node.trace, msg)
    return None


def _record_leaf(node: Node, opts: Options, leaves: set | None) -> None:
    if leaves is not None and opts.prop is not None:
        obs = opts.prop.leaf(node.prop)
        if obs is not None:
            leaves.add(obs)


@dataclass(frozen=True)
class _Failed:
    branch: tuple
    verdict: Verdict


def _search(start: list[tuple[Node, int]], opts: Options, stats: Stats,
            terminals: set | None, leaves: set | None = None) -> Counterexample | None:
    visited: dict = {}
    stack = list(reversed(start))
    while stack:
        node, depth = stack.pop()
        if isinstance(node, _Failed):
            return Counterexample(node.branch, node.verdict.trace, node.verdict)
        stats.max_pool = max(stats.max_pool, len(node.cfg.threads))
        if opts.dedup:
            key = canonical_key(node.cfg, node.spec, node.prop)
            seen = visited.get(key)
            if seen is not None and seen <= depth:
                stats.dedup_hits += 1
                _record_leaf(node, opts, leaves)
                continue
            visited[key] = depth
        stats.states += 1
        if stats.states > opts.max_states:
            raise StateBudgetExceeded(stats.states)
        v = _node_verdict(node, opts, stats)
        if v is not None:
            return Counterexample(node.branch, node.trace, v)
        if node.cfg.finished:
            if terminals is not None:
                terminals.add(canonical_config(node.cfg).heap)
            _record_leaf(node, opts, leaves)
            continue
        if depth >= opts.depth:
            stats.frontier += 1
            _record_leaf(node, opts, leaves)
            continue
        children = successors(node, opts, stats)
        if not children:
            _record_leaf(node, opts, leaves)
        for choice, child in reversed(children):
            if isinstance(child, Verdict):
                # Resolved when popped, so earlier branches go first.
                stack.append((_Failed(node.branch + (choice,), child), depth + 1))
            else:
                stack.append((child, depth + 1))
    return None


def explore(program: Expr, net: Net, depth: int = DEFAULT_DEPTH, dedup: bool = True,
            closure_bound: int = 64, max_states: int = DEFAULT_BUDGET,
            prop: Property | None = None, workers: int = 1,
            collect_terminals: bool = False, prophecies: Callable | None = None) -> Report:
    """Check that no failed configuration is reachable within `depth` steps."""
    opts = Options(depth, dedup, closure_bound, max_states, prop, prophecies, collect_terminals)
    stats = Stats()
    terminals: set | None = set() if collect_terminals else None
    leaves: set | None = set() if prop is not None else None
    root = root_node(program, net, opts)
    if workers <= 1:
        cex = _search([(root, 0)], opts, stats, terminals, leaves)
        return Report(depth, stats, cex, terminals, leaves, prop)

    # Parallel mode: one worker per root branch, each with its own visited
    # set; the first counterexample in branch order wins.
    stats.states += 1
    v = _node_verdict(root, opts, stats)
    if v is not None:
        return Report(depth, stats, Counterexample((), (), v), terminals, leaves, prop)
    children = [] if root.cfg.finished or depth == 0 else successors(root, opts, stats)
    if not children:
        if terminals is not None and root.cfg.finished:
            terminals.add(canonical_config(root.cfg).heap)
        if depth == 0 and not root.cfg.finished:
            stats.frontier += 1
        _record_leaf(root, opts, leaves)
        return Report(depth, stats, None, terminals, leaves, prop)

    def run_branch(item):
        choice, child = item
        st = Stats()
        if isinstance(child, Verdict):
            return st, Counterexample((choice,), child.trace, child), set(), set()
        local_terms: set = set()
        local_leaves: set = set()
        cex = _search([(child, 1)], opts, st, local_terms if collect_terminals else None,
                      local_leaves if leaves is not None else None)
        return st, cex, local_terms, local_leaves

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_branch, children))
    cex = None
    for st, c, terms, obs in results:
        stats.merge(st)
        if terminals is not None:
            terminals |= terms
        if leaves is not None:
            leaves |= obs
        if cex is None and c is not None:
            cex = c
    if stats.states > max_states:
        raise StateBudgetExceeded(stats.states)
    return Report(depth, stats, cex, terminals, leaves, prop)


def replay(program: Expr, net: Net, cex: Counterexample, closure_bound: int = 64):
    """Re-run a counterexample's branch under the monitor with a scheduled
    oracle; returns the monitor's RunResult."""
    schedule = ReplaySchedule(i for i, _ in cex.branch)
    results = [c for i, c in cex.branch if c is not None and isinstance(c, Expr)]
    return monitored_run(program, net, ReplayEnv(results), schedule,
                         bound=closure_bound, coalesce=True)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _show_choice(c) -> str:
    if c is None:
        return "-"
    if isinstance(c, tuple):
        return "[" + ", ".join(show_value(v) for v in c) + "]"
    return show_value(c)


def verdict_dict(v: Verdict) -> dict:
    d: dict = {"kind": v.name, "exit_code": v.exit_code, "message": v.describe()}
    if isinstance(v, Failure):
        d["thread"] = v.thread
        d["reason"] = v.reason
    elif isinstance(v, ProgramViolation):
        d["thread"] = v.thread
        d["action"] = f"{v.tag}({show_value(v.arg) if v.arg is not None else ''})"
    elif isinstance(v, EnvironmentViolation):
        d["result"] = show_value(v.result)
        d["allowed"] = [show_value(a) for a in v.allowed]
    return d


def report_dict(rep: Report) -> dict:
    d: dict = {
        "schema": REPORT_SCHEMA,
        "result": rep.result,
        "depth": rep.depth,
        "stats": rep.stats.as_dict(),
    }
    if rep.counterexample is not None:
        c = rep.counterexample
        d["counterexample"] = {
            "branch": [[i, _show_choice(ch)] for i, ch in c.branch],
            "trace": [show_action(a) for a in c.trace],
            "verdict": verdict_dict(c.verdict),
        }
    if rep.observations is not None:
        d["observations"] = rep.show_observations()
    return d


def report_json(rep: Report) -> str:
    return json.dumps(report_dict(rep), indent=2, sort_keys=True) + "\n"


def report_text(rep: Report) -> str:
    lines = [f"result: {rep.result}", f"depth: {rep.depth}"]
    for k, v in rep.stats.as_dict().items():
        lines.append(f"{k}: {v}")
    if rep.observations is not None:
        for o in rep.show_observations():
            lines.append("observed: " + o)
    c = rep.counterexample
    if c is not None:
        lines.append("verdict: " + c.verdict.describe())
        lines.append("branch: " + " ".join(f"{i}:{_show_choice(ch)}" for i, ch in c.branch))
        lines.append("trace:")
        lines += [f"  {show_action(a)}" for a in c.trace]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Prophecy domains (instrumented semantics)
# ---------------------------------------------------------------------------


class DomainTooLarge(Exception):
    pass


def prophecy_candidates(constraint, domain: tuple, n: int) -> list[tuple]:
    """Prophecies drawn from `domain` for a fresh variable: all maximal
    sequences of length <= n that are prefixes of the constraint (a simple
    variable gets a single value)."""
    if constraint is None:
        return [(v,) for v in domain] if n > 0 else [()]
    out = []
    for length in range(n, -1, -1):
        for seq in itertools.product(domain, repeat=length):
            if not prophecy.accepts_prefix(constraint, seq):
                continue
            if length < n and any(prophecy.accepts_prefix(constraint, seq + (v,)) for v in domain):
                continue
            out.append(seq)
    return sorted(out, key=lambda s: (len(s), tuple(sort_key(v) for v in s)))


def remaining_candidates(entry: prophecy.PVarEntry, domain: tuple, n: int) -> list[tuple]:
    """What an instrumented run could still hold for a pvar whose
    intermediate state is `entry` (with an in-domain history)."""
    used = len(entry.history)
    if entry.constraint is None and not entry.live:
        return [()]
    if entry.constraint is None:
        return [(v,) for v in domain] if n > 0 else [()]
    if used >= n:
        return [()]
    return prophecy_candidates(entry.constraint, domain, n - used)
