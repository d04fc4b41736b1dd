"""Labeled operational semantics: head reduction, thread-pool steps, heaps.

A configuration is an immutable snapshot (thread pool, heap, prophecy
state). The heap is a tuple indexed by location; since cells are never
freed, `len(heap)` is always the lowest unused location.
"""

from __future__ import annotations

from dataclasses import dataclass

from iospec import prophecy
from iospec.syntax import (
    CAS, FALSE, TRUE, UNIT, App, Assert, Assign, AssignPVar, AtomicDeref, Cases,
    CreatePVar, Decomposition, Deref, Expr, Fork, Fst, Inl, Inr, IOCall, IsValue,
    Lam, Loc, Pair, Prim, Ref, Snd, Frame, eval_prim, decompose, is_data, plug,
    substitute,
)

# Redex kinds. LOCAL steps touch nothing but their own thread.
VALUE = "value"
LOCAL = "local"
HEAP = "heap"
IO = "io"
FORK = "fork"
CREATE_PVAR = "create_pvar"
ASSIGN_PVAR = "assign_pvar"
STUCK = "stuck"


@dataclass(frozen=True)
class Config:
    threads: tuple[Expr, ...]
    heap: tuple[Expr, ...] = ()
    pvars: tuple = ()

    @property
    def finished(self) -> bool:
        return all(t.is_value for t in self.threads)


def initial_config(e: Expr) -> Config:
    return Config((e,))


@dataclass(frozen=True)
class Redex:
    kind: str
    context: tuple[Frame, ...] = ()
    head: Expr | None = None


_VALUE_REDEX = Redex(VALUE)


def redex(e: Expr) -> Redex:
    """Classify the next step of a thread expression (memoised on the node)."""
    try:
        return e._redex
    except AttributeError:
        r = _classify(e)
        object.__setattr__(e, "_redex", r)
        return r


def _classify(e: Expr) -> Redex:
    d = decompose(e)
    if isinstance(d, IsValue):
        return _VALUE_REDEX
    if not isinstance(d, Decomposition):
        return Redex(STUCK, d.context, d.head)
    h = d.head
    if isinstance(h, IOCall):
        kind = IO
    elif isinstance(h, (Ref, Deref, AtomicDeref, Assign, CAS)):
        kind = HEAP
    elif isinstance(h, Fork):
        kind = FORK
    elif isinstance(h, CreatePVar):
        kind = CREATE_PVAR
    elif isinstance(h, AssignPVar):
        kind = ASSIGN_PVAR
    else:
        kind = LOCAL
    return Redex(kind, d.context, h)


# ---------------------------------------------------------------------------
# Head reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reduced:
    expr: Expr
    heap: tuple
    forked: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class NeedsIO:
    tag: str
    arg: Expr


@dataclass(frozen=True)
class NeedsPVar:
    kind: str  # 'create' | 'assign'
    payload: tuple


@dataclass(frozen=True)
class StuckHead:
    reason: str = ""


def _cell(heap: tuple, loc: Expr) -> int | None:
    if isinstance(loc, Loc) and 0 <= loc.n < len(heap):
        return loc.n
    return None


def head_step(heap: tuple, e: Expr):
    """One head-reduction step of `e` against `heap`."""
    if isinstance(e, App):
        if isinstance(e.f, Lam) and e.a.is_value:
            return Reduced(substitute(e.f.body, e.f.var, e.a), heap)
        return StuckHead("application of a non-function")
    if isinstance(e, Cases):
        v = e.e
        if isinstance(v, Inl) and v.is_value and isinstance(e.left, Lam):
            return Reduced(substitute(e.left.body, e.left.var, v.e), heap)
        if isinstance(v, Inr) and v.is_value and isinstance(e.right, Lam):
            return Reduced(substitute(e.right.body, e.right.var, v.e), heap)
        return StuckHead("cases on a non-sum")
    if isinstance(e, Fst):
        if isinstance(e.e, Pair) and e.e.is_value:
            return Reduced(e.e.a, heap)
        return StuckHead("fst of a non-pair")
    if isinstance(e, Snd):
        if isinstance(e.e, Pair) and e.e.is_value:
            return Reduced(e.e.b, heap)
        return StuckHead("snd of a non-pair")
    if isinstance(e, Assert):
        if e.e == TRUE:
            return Reduced(UNIT, heap)
        return StuckHead("assertion failed")
    if isinstance(e, Prim):
        out = eval_prim(e.op, e.a, e.b)
        if out is None:
            return StuckHead(f"undefined operator {e.op}")
        return Reduced(out, heap)
    if isinstance(e, Ref):
        return Reduced(Loc(len(heap)), heap + (e.e,))
    if isinstance(e, (Deref, AtomicDeref)):
        n = _cell(heap, e.e)
        if n is None:
            return StuckHead("dereference of a non-location")
        return Reduced(heap[n], heap)
    if isinstance(e, Assign):
        n = _cell(heap, e.loc)
        if n is None:
            return StuckHead("assignment to a non-location")
        return Reduced(UNIT, heap[:n] + (e.val,) + heap[n + 1:])
    if isinstance(e, CAS):
        n = _cell(heap, e.loc)
        if n is None:
            return StuckHead("CAS on a non-location")
        current = heap[n]
        if not (is_data(current) and is_data(e.old)):
            return StuckHead("CAS compares a value outside DataVals")
        if current == e.old:
            return Reduced(TRUE, heap[:n] + (e.new,) + heap[n + 1:])
        return Reduced(FALSE, heap)
    if isinstance(e, IOCall):
        return NeedsIO(e.tag, e.e)
    if isinstance(e, Fork):
        return Reduced(UNIT, heap, (e.e,))
    if isinstance(e, CreatePVar):
        return NeedsPVar("create", (e.constraint,))
    if isinstance(e, AssignPVar):
        return NeedsPVar("assign", (e.pvar, e.val))
    return StuckHead("no rule applies")


# ---------------------------------------------------------------------------
# Thread-pool steps
# ---------------------------------------------------------------------------


class StuckThread(Exception):
    def __init__(self, index: int, reason: str):
        super().__init__(f"thread {index} is stuck: {reason}")
        self.index = index
        self.reason = reason


class Blocked(Exception):
    """The thread's next step is disabled (not failed): a constraint or
    prophecy mismatch, or an I/O result that is not available."""

    def __init__(self, index: int, kind: str, detail: str = ""):
        super().__init__(f"thread {index} is blocked ({kind}) {detail}".rstrip())
        self.index = index
        self.kind = kind
        self.detail = detail


class NeedsIOResult(Exception):
    def __init__(self, tag: str, arg: Expr):
        super().__init__(f"{tag} needs a result")
        self.tag = tag
        self.arg = arg


@dataclass(frozen=True)
class Step:
    config: Config
    label: tuple | None = None  # (tag, arg, result) for I/O steps
    note: tuple | None = None   # ('assign_pvar', id, value) / ('create_pvar', id)


def thread_step(cfg: Config, i: int, io_result: Expr | None = None,
                prophecy_values: tuple | None = None) -> Step:
    """Rewrite thread `i` by one small step.

    `io_result` resolves an I/O redex; `prophecy_values` (instrumented
    semantics only) is the prophecy drawn for a created variable.
    """
    e = cfg.threads[i]
    r = redex(e)
    if r.kind == VALUE:
        raise ValueError(f"thread {i} is finished")
    if r.kind == STUCK:
        out = head_step(cfg.heap, r.head)
        if isinstance(out, StuckHead):
            reason = out.reason
        elif isinstance(r.head, AssignPVar):
            reason = "assign_pvar on a non-identifier"
        else:
            reason = "no rule applies"
        raise StuckThread(i, reason)
    out = head_step(cfg.heap, r.head)
    heap, pvars, label, note, forked = cfg.heap, cfg.pvars, None, None, ()
    if isinstance(out, StuckHead):
        raise StuckThread(i, out.reason)
    if isinstance(out, Reduced):
        new, heap, forked = out.expr, out.heap, out.forked
    elif isinstance(out, NeedsIO):
        if io_result is None:
            raise NeedsIOResult(out.tag, out.arg)
        new = io_result
        label = (out.tag, out.arg, io_result)
    elif out.kind == "create":
        try:
            pvars, pid = prophecy.create_pvar_step(pvars, out.payload[0], prophecy_values)
        except prophecy.UnsatisfiableConstraint as exc:
            raise StuckThread(i, f"unsatisfiable constraint {exc}") from None
        new = pid
        note = ("create_pvar", pid.n)
    else:
        pid, v = out.payload
        try:
            pvars = prophecy.assign_pvar_step(pvars, pid, v)
        except prophecy.UnknownIdentifier as exc:
            raise StuckThread(i, f"unknown prophecy variable {exc}") from None
        except prophecy.ConstraintBlocked as exc:
            raise Blocked(i, "constraint", str(exc)) from None
        except prophecy.ProphecyMismatch as exc:
            raise Blocked(i, "nomatch", str(exc)) from None
        new = UNIT
        note = ("assign_pvar", pid.n, v)
    threads = cfg.threads[:i] + (plug(r.context, new),) + forked + cfg.threads[i + 1:]
    return Step(Config(threads, heap, pvars), label, note)


def run_local(cfg: Config, i: int, limit: int) -> tuple[Config, int]:
    """Take up to `limit` consecutive LOCAL steps of thread `i`."""
    e = cfg.threads[i]
    steps = 0
    while steps < limit:
        r = redex(e)
        if r.kind != LOCAL:
            break
        out = head_step(cfg.heap, r.head)
        if not isinstance(out, Reduced):
            break
        e = plug(r.context, out.expr)
        steps += 1
    if steps:
        cfg = Config(cfg.threads[:i] + (e,) + cfg.threads[i + 1:], cfg.heap, cfg.pvars)
    return cfg, steps


def is_stuck(e: Expr) -> bool:
    return redex(e).kind == STUCK


def is_failed(cfg: Config, io_allowed=None) -> bool:
    """Some thread is not a value and cannot step.

    `io_allowed(tag, arg)` tells whether the specification admits some
    result for an I/O redex; without it every I/O redex is reducible.
    """
    return failed_thread(cfg, io_allowed) is not None


def failed_thread(cfg: Config, io_allowed=None) -> int | None:
    for i, e in enumerate(cfg.threads):
        r = redex(e)
        if r.kind == VALUE:
            continue
        if r.kind == STUCK:
            return i
        if r.kind == IO and io_allowed is not None and not io_allowed(r.head.tag, r.head.e):
            return i
        if r.kind in (LOCAL, HEAP) and isinstance(head_step(cfg.heap, r.head), StuckHead):
            return i
        if r.kind == CREATE_PVAR and r.head.constraint is not None and not prophecy.nonempty(r.head.constraint):
            return i
        if r.kind == ASSIGN_PVAR:
            pid = r.head.pvar
            if not (0 <= pid.n < len(cfg.pvars) and cfg.pvars[pid.n].live):
                return i
    return None
