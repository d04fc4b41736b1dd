"""Prophecy variables: residual-queryable constraints on assigned-value
sequences and the prophecy-variable state carried by configurations.

A constraint denotes a set of finite value sequences. An open-ended literal
sequence `[a, b, ..]` stands for every sequence starting with `a, b`, which
is how infinite (omega) behaviours are presented at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from iospec.lexer import TokenStream, parse_literal
from iospec.syntax import Expr, PVarId, show_value, sort_key


class Constraint:
    """Base class; concrete constraints are frozen dataclasses."""

    def __str__(self) -> str:
        return show_constraint(self)


@dataclass(frozen=True)
class Universal(Constraint):
    pass


@dataclass(frozen=True)
class Literal(Constraint):
    # (sequence, open_ended) pairs
    seqs: frozenset[tuple[tuple[Expr, ...], bool]]


@dataclass(frozen=True)
class Interleave(Constraint):
    left: Constraint
    right: Constraint


@dataclass(frozen=True)
class SuffixAny(Constraint):
    """Every sequence that extends one of the given prefixes."""

    prefixes: frozenset[tuple[Expr, ...]]


@dataclass(frozen=True)
class Union(Constraint):
    # Internal only: produced by residuals of Interleave.
    parts: frozenset[Constraint]


EMPTY = Literal(frozenset())
EPSILON = Literal(frozenset({((), False)}))


def literal(*seqs: Iterable[Expr], open_ended: bool = False) -> Literal:
    return Literal(frozenset((tuple(s), open_ended) for s in seqs))


def nonempty(c: Constraint) -> bool:
    if isinstance(c, Universal):
        return True
    if isinstance(c, Literal):
        return bool(c.seqs)
    if isinstance(c, SuffixAny):
        return bool(c.prefixes)
    if isinstance(c, Interleave):
        return nonempty(c.left) and nonempty(c.right)
    if isinstance(c, Union):
        return any(nonempty(p) for p in c.parts)
    raise TypeError(c)


def nullable(c: Constraint) -> bool:
    """Whether the empty sequence is a member."""
    if isinstance(c, Universal):
        return True
    if isinstance(c, Literal):
        return any(not s for s, _ in c.seqs)
    if isinstance(c, SuffixAny):
        return () in c.prefixes
    if isinstance(c, Interleave):
        return nullable(c.left) and nullable(c.right)
    if isinstance(c, Union):
        return any(nullable(p) for p in c.parts)
    raise TypeError(c)


def union(parts: Iterable[Constraint]) -> Constraint:
    """Smart constructor: flattens, drops empty parts, merges literals."""
    flat: set[Constraint] = set()
    lit: set = set()
    stack = list(parts)
    while stack:
        p = stack.pop()
        if isinstance(p, Union):
            stack.extend(p.parts)
        elif isinstance(p, Universal):
            return p
        elif isinstance(p, Literal):
            lit |= p.seqs
        elif nonempty(p):
            flat.add(p)
    if lit:
        flat.add(Literal(frozenset(lit)))
    if not flat:
        return EMPTY
    if len(flat) == 1:
        return next(iter(flat))
    return Union(frozenset(flat))


def interleave(left: Constraint, right: Constraint) -> Constraint:
    """Smart constructor for Interleave with the unit/zero laws applied."""
    if not nonempty(left) or not nonempty(right):
        return EMPTY
    if left == EPSILON:
        return right
    if right == EPSILON:
        return left
    return Interleave(left, right)


def residual(c: Constraint, v: Expr) -> Constraint:
    """The tails of members that start with `v`."""
    if isinstance(c, Universal):
        return c
    if isinstance(c, Literal):
        out = set()
        for s, open_ended in c.seqs:
            if s:
                if s[0] == v:
                    out.add((s[1:], open_ended))
            elif open_ended:
                out.add(((), True))
        return Literal(frozenset(out))
    if isinstance(c, SuffixAny):
        out = set()
        for p in c.prefixes:
            if not p:
                out.add(())
            elif p[0] == v:
                out.add(p[1:])
        if () in out:
            return SuffixAny(frozenset({()}))
        return SuffixAny(frozenset(out))
    if isinstance(c, Interleave):
        return union([
            interleave(residual(c.left, v), c.right),
            interleave(c.left, residual(c.right, v)),
        ])
    if isinstance(c, Union):
        return union(residual(p, v) for p in c.parts)
    raise TypeError(c)


def accepts_prefix(c: Constraint, seq: Iterable[Expr]) -> bool:
    """Whether `seq` is a prefix of some member of `c`."""
    for v in seq:
        c = residual(c, v)
        if not nonempty(c):
            return False
    return nonempty(c)


def accepts(c: Constraint, seq: Iterable[Expr]) -> bool:
    """Whether `seq` is a member of `c`."""
    for v in seq:
        c = residual(c, v)
    return nullable(c)


# ---------------------------------------------------------------------------
# Printing and parsing
# ---------------------------------------------------------------------------


def _show_seq(seq: tuple[Expr, ...], open_ended: bool) -> str:
    items = [show_value(v) for v in seq]
    if open_ended:
        items.append("..")
    return "[" + ", ".join(items) + "]"


def show_constraint(c: Constraint) -> str:
    if isinstance(c, Universal):
        return "any"
    if isinstance(c, Literal):
        seqs = sorted(c.seqs, key=lambda so: (len(so[0]), tuple(sort_key(v) for v in so[0]), so[1]))
        return "lit{" + ", ".join(_show_seq(s, o) for s, o in seqs) + "}"
    if isinstance(c, SuffixAny):
        seqs = sorted(c.prefixes, key=lambda s: (len(s), tuple(sort_key(v) for v in s)))
        return "prefixes{" + ", ".join(_show_seq(s, False) for s in seqs) + "}"
    if isinstance(c, Interleave):
        return f"interleave({show_constraint(c.left)}, {show_constraint(c.right)})"
    if isinstance(c, Union):
        return "union(" + ", ".join(sorted(show_constraint(p) for p in c.parts)) + ")"
    raise TypeError(c)


def _parse_seq(ts: TokenStream, allow_open: bool) -> tuple[tuple[Expr, ...], bool]:
    ts.expect("[")
    items: list[Expr] = []
    open_ended = False
    while not ts.at("]"):
        if allow_open and ts.accept(".."):
            open_ended = True
            break
        items.append(parse_literal(ts))
        if not ts.accept(","):
            break
    ts.expect("]")
    return tuple(items), open_ended


def _parse_set(ts: TokenStream, allow_open: bool) -> list:
    ts.expect("{")
    seqs = []
    while not ts.at("}"):
        seqs.append(_parse_seq(ts, allow_open))
        if not ts.accept(","):
            break
    ts.expect("}")
    return seqs


def parse_constraint_tokens(ts: TokenStream) -> Constraint:
    """Constraint literal: any | lit{..} | prefixes{..} | interleave(C, C) | union(C, ...)."""
    t = ts.tok
    if ts.accept("any"):
        return Universal()
    if ts.accept("lit"):
        return Literal(frozenset(_parse_set(ts, True)))
    if ts.accept("prefixes"):
        return SuffixAny(frozenset(s for s, _ in _parse_set(ts, False)))
    if ts.accept("interleave"):
        ts.expect("(")
        left = parse_constraint_tokens(ts)
        ts.expect(",")
        right = parse_constraint_tokens(ts)
        ts.expect(")")
        return Interleave(left, right)
    if ts.accept("union"):
        ts.expect("(")
        parts = [parse_constraint_tokens(ts)]
        while ts.accept(","):
            parts.append(parse_constraint_tokens(ts))
        ts.expect(")")
        return Union(frozenset(parts))
    ts.error(f"expected a constraint, found {ts.describe()}", t)


def parse_constraint(text: str) -> Constraint:
    ts = TokenStream(text)
    c = parse_constraint_tokens(ts)
    if not ts.at_kind("eof"):
        ts.error(f"trailing input {ts.describe()}")
    return c


CONSTRAINT_KEYWORDS = ("any", "lit", "prefixes", "interleave", "union")


# ---------------------------------------------------------------------------
# Prophecy-variable state
# ---------------------------------------------------------------------------


class UnsatisfiableConstraint(Exception):
    pass


class UnknownIdentifier(Exception):
    pass


class ConstraintBlocked(Exception):
    """The assigned value leaves the constraint empty: the step is disabled."""


class ProphecyMismatch(Exception):
    """Instrumented semantics only: the value differs from the prophesied one
    (the assignment would loop forever)."""


@dataclass(frozen=True)
class PVarEntry:
    # None marks a simple pvar: assigned once, then removed from the live set.
    constraint: Constraint | None
    live: bool = True
    history: tuple[Expr, ...] = ()
    # Instrumented semantics only: the not-yet-consumed prophesied values.
    # Once exhausted, any value matches.
    prophecy: tuple[Expr, ...] | None = None


PVarState = tuple  # tuple[PVarEntry, ...], indexed by identifier


def create_pvar_step(st: PVarState, constraint: Constraint | None,
                     prophecy: tuple[Expr, ...] | None = None) -> tuple[PVarState, PVarId]:
    if constraint is not None and not nonempty(constraint):
        raise UnsatisfiableConstraint(show_constraint(constraint))
    entry = PVarEntry(constraint=constraint, prophecy=prophecy)
    return st + (entry,), PVarId(len(st))


def assign_pvar_step(st: PVarState, pid: PVarId, v: Expr) -> PVarState:
    if not isinstance(pid, PVarId) or not 0 <= pid.n < len(st) or not st[pid.n].live:
        raise UnknownIdentifier(show_value(pid))
    entry = st[pid.n]
    constraint = entry.constraint
    if constraint is not None:
        constraint = residual(constraint, v)
        if not nonempty(constraint):
            raise ConstraintBlocked(f"{show_value(pid)} := {show_value(v)}")
    prophecy = entry.prophecy
    if prophecy:
        if prophecy[0] != v:
            raise ProphecyMismatch(f"{show_value(pid)} := {show_value(v)}")
        prophecy = prophecy[1:]
    new = replace(
        entry,
        constraint=constraint,
        live=entry.constraint is not None,
        history=entry.history + (v,),
        prophecy=prophecy,
    )
    return st[: pid.n] + (new,) + st[pid.n + 1:]


def erase_prophecies(st: PVarState) -> PVarState:
    return tuple(replace(e, prophecy=None) if e.prophecy is not None else e for e in st)


def live_ids(st: PVarState) -> tuple[int, ...]:
    return tuple(i for i, e in enumerate(st) if e.live)

