"""Brute-force oracles shared by the unit and acceptance tests."""

from __future__ import annotations

import itertools
import time

from iospec import prophecy
from iospec.monitor import accepts_trace, initial_spec_state
from iospec.petri import traces_upto
from iospec.syntax import Int

ALPHABET = (Int(0), Int(1), Int(2))


def sequences(alphabet=ALPHABET, max_len: int = 4):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


def merges(a: tuple, b: tuple) -> set[tuple]:
    """All order-preserving merges of a and b."""
    if not a:
        return {b}
    if not b:
        return {a}
    return {(a[0],) + m for m in merges(a[1:], b)} | {(b[0],) + m for m in merges(a, b[1:])}


def constraint_law_mismatches(max_len: int = 4) -> tuple[int, int]:
    """Compare residual-chain acceptance with brute-force membership on all
    single-sequence literals and all interleavings of two literals whose
    merged length is at most `max_len`, for every query of length
    <= `max_len`. Returns (mismatches, checks)."""
    queries = list(sequences(max_len=max_len))
    bad = checks = 0
    for s in queries:
        c = prophecy.literal(s)
        for q in queries:
            checks += 1
            bad += prophecy.accepts(c, q) != (q == s)
            checks += 1
            bad += prophecy.accepts_prefix(c, q) != (s[: len(q)] == q)
    for a in queries:
        for b in sequences(max_len=max_len - len(a)):
            c = prophecy.interleave(prophecy.literal(a), prophecy.literal(b))
            members = merges(a, b)
            prefixes = {m[:k] for m in members for k in range(len(m) + 1)}
            for q in queries:
                checks += 2
                bad += prophecy.accepts(c, q) != (q in members)
                bad += prophecy.accepts_prefix(c, q) != (q in prefixes)
    return bad, checks


def all_actions(traces: set[tuple]) -> set[tuple]:
    return {a for t in traces for a in t}


def trace_oracle_mismatches(net, k: int = 4, bound: int = 64) -> tuple[int, int]:
    """Monitor acceptance versus `traces_upto` membership on every trace of
    length <= k over the actions occurring in the net's traces (plus one
    foreign result per action to exercise rejection)."""
    traces = traces_upto(net, net.init, k, bound)
    actions = sorted(all_actions(traces), key=repr)
    spec = initial_spec_state(net, bound)
    # Perturbed copies of real actions: same tag and argument, unseen result.
    foreign = [(t, a, Int(-99)) for t, a, _ in actions[:2]]
    alphabet = actions + foreign
    bad = checks = 0
    # Extend only accepted prefixes, plus one step beyond for rejections.
    frontier = [()]
    for _ in range(k + 1):
        nxt = []
        for tr in frontier:
            checks += 1
            acc = accepts_trace(spec, tr)
            bad += acc != (tr in traces)
            if acc and len(tr) < k:
                nxt += [tr + (a,) for a in alphabet]
        frontier = nxt
    return bad, checks


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def naive_outcomes(program, net, max_steps: int = 400):
    """Every interleaving of single small steps (no coalescing, no
    deduplication beyond exact configurations). Returns (failed, terminal
    heaps) where `failed` says whether some failed configuration is
    reachable."""
    from iospec import interp
    from iospec.explorer import canonical_config
    from iospec.interp import initial_config, redex
    from iospec.monitor import allowed_results, check_failed

    start = (initial_config(program), initial_spec_state(net))
    seen = {start}
    stack = [start]
    terminals = set()
    failed = False
    while stack:
        cfg, spec = stack.pop()
        if check_failed(cfg, spec, ()) is not None:
            failed = True
            continue
        if cfg.finished:
            terminals.add(canonical_config(cfg).heap)
            continue
        for i, e in enumerate(cfg.threads):
            r = redex(e)
            if r.kind == interp.VALUE:
                continue
            options = [(None, spec)]
            if r.kind == interp.IO:
                options = list(allowed_results(spec, r.head.tag, r.head.e).items())
            for res, spec2 in options:
                try:
                    nxt = (interp.thread_step(cfg, i, res).config, spec2)
                except interp.Blocked:
                    continue
                except interp.StuckThread:
                    failed = True
                    continue
                if nxt not in seen:
                    if len(seen) > 200_000:
                        raise RuntimeError("naive oracle state space too large")
                    seen.add(nxt)
                    stack.append(nxt)
    return failed, terminals
