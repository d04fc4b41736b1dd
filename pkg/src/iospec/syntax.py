"""Core expression language: constructors, values, substitution and
evaluation-context decomposition.

Every node is immutable and hashable. Hashes, free-variable sets and the
value flag are computed once per node and cached, because the explorer
hashes whole thread pools on every visited state.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, replace
from typing import ClassVar, Iterator, Union

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


class Expr:
    __slots__ = ("_hash", "_fv", "_val", "_redex")

    # Names of the fields holding sub-expressions, in evaluation order.
    children: ClassVar[tuple[str, ...]] = ()

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + tuple(getattr(self, f) for f in self.__match_args__))
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return all(getattr(self, f) == getattr(other, f) for f in self.__match_args__)

    def __ne__(self, other: object) -> bool:
        return not self == other

    @property
    def fv(self) -> frozenset[str]:
        try:
            return self._fv
        except AttributeError:
            fv = self._free_vars()
            object.__setattr__(self, "_fv", fv)
            return fv

    def _free_vars(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for name in self.children:
            out |= getattr(self, name).fv
        return out

    @property
    def is_value(self) -> bool:
        try:
            return self._val
        except AttributeError:
            val = self._compute_value()
            object.__setattr__(self, "_val", val)
            return val

    def _compute_value(self) -> bool:
        return False

    def subterms(self) -> Iterator[Expr]:
        for name in self.children:
            yield getattr(self, name)

    def __repr__(self) -> str:
        return pretty(self)


def _node(cls):
    return dataclass(frozen=True, slots=True, eq=False, repr=False)(cls)


@_node
class Unit(Expr):
    def _compute_value(self) -> bool:
        return True


@_node
class Char(Expr):
    c: str

    def _compute_value(self) -> bool:
        return True


@_node
class Int(Expr):
    n: int

    def _compute_value(self) -> bool:
        return True


@_node
class Loc(Expr):
    n: int

    def _compute_value(self) -> bool:
        return True


@_node
class PVarId(Expr):
    n: int

    def _compute_value(self) -> bool:
        return True


@_node
class Inl(Expr):
    e: Expr
    children = ("e",)

    def _compute_value(self) -> bool:
        return self.e.is_value


@_node
class Inr(Expr):
    e: Expr
    children = ("e",)

    def _compute_value(self) -> bool:
        return self.e.is_value


@_node
class Pair(Expr):
    a: Expr
    b: Expr
    children = ("a", "b")

    def _compute_value(self) -> bool:
        return self.a.is_value and self.b.is_value


@_node
class Lam(Expr):
    var: str
    body: Expr
    children = ("body",)

    def _free_vars(self) -> frozenset[str]:
        return self.body.fv - {self.var}

    def _compute_value(self) -> bool:
        return True


@_node
class Var(Expr):
    name: str

    def _free_vars(self) -> frozenset[str]:
        return frozenset((self.name,))


@_node
class Cases(Expr):
    e: Expr
    left: Expr
    right: Expr
    children = ("e", "left", "right")


@_node
class Fst(Expr):
    e: Expr
    children = ("e",)


@_node
class Snd(Expr):
    e: Expr
    children = ("e",)


@_node
class App(Expr):
    f: Expr
    a: Expr
    children = ("f", "a")


@_node
class Assert(Expr):
    e: Expr
    children = ("e",)


@_node
class Ref(Expr):
    e: Expr
    children = ("e",)


@_node
class Deref(Expr):
    e: Expr
    children = ("e",)


@_node
class Assign(Expr):
    loc: Expr
    val: Expr
    children = ("loc", "val")


@_node
class IOCall(Expr):
    tag: str
    e: Expr
    children = ("e",)


@_node
class Fork(Expr):
    e: Expr
    children = ("e",)


@_node
class AtomicDeref(Expr):
    e: Expr
    children = ("e",)


@_node
class CAS(Expr):
    loc: Expr
    old: Expr
    new: Expr
    children = ("loc", "old", "new")


@_node
class CreatePVar(Expr):
    # None marks a simple (assign-once) prophecy variable; otherwise a
    # prophecy.Constraint for a constrained incremental one.
    constraint: object = None


@_node
class AssignPVar(Expr):
    pvar: Expr
    val: Expr
    children = ("pvar", "val")


@_node
class Prim(Expr):
    op: str
    a: Expr
    b: Expr
    children = ("a", "b")


CORE_TYPES = (
    Unit, Char, Int, Loc, PVarId, Inl, Inr, Pair, Lam, Var, Cases, Fst, Snd, App,
    Assert, Ref, Deref, Assign, IOCall, Fork, AtomicDeref, CAS, CreatePVar,
    AssignPVar, Prim,
)

UNIT = Unit()
TRUE = Inl(UNIT)
FALSE = Inr(UNIT)
NIL = Inl(UNIT)


def boolean(b: bool) -> Expr:
    return TRUE if b else FALSE


def cons(head: Expr, tail: Expr) -> Expr:
    return Inr(Pair(head, tail))


def make_list(items) -> Expr:
    out = NIL
    for item in reversed(list(items)):
        out = cons(item, out)
    return out


def make_string(s: str) -> Expr:
    return make_list(Char(c) for c in s)


def list_items(v: Expr) -> list[Expr] | None:
    """Elements of a cons-list value, or None if `v` is not a proper list."""
    items = []
    while True:
        if isinstance(v, Inl) and isinstance(v.e, Unit):
            return items
        if isinstance(v, Inr) and isinstance(v.e, Pair):
            items.append(v.e.a)
            v = v.e.b
            continue
        return None


def is_data(v: Expr) -> bool:
    """True for first-order values: the only ones CAS and `=` may compare."""
    stack = [v]
    while stack:
        x = stack.pop()
        if isinstance(x, (Unit, Char, Int)):
            continue
        if isinstance(x, (Inl, Inr)):
            stack.append(x.e)
        elif isinstance(x, Pair):
            stack.append(x.a)
            stack.append(x.b)
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

_fresh_counter = itertools.count()


def fresh_name(base: str, avoid: frozenset[str] | set[str]) -> str:
    stem = base.rstrip("0123456789_")  or "v"
    while True:
        cand = f"{stem}_{next(_fresh_counter)}"
        if cand not in avoid:
            return cand


def with_child(node: Expr, field: str, child: Expr) -> Expr:
    # Positional rebuild; much cheaper than dataclasses.replace on hot paths.
    return type(node)(*[child if f == field else getattr(node, f) for f in node.__match_args__])


def substitute(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding substitution of `v` for the free occurrences of `x`."""
    if x not in e.fv:
        return e
    if isinstance(e, Var):
        return v
    if isinstance(e, Lam):
        if e.var == x:
            return e
        if e.var in v.fv:
            new = fresh_name(e.var, e.body.fv | v.fv | {x})
            body = substitute(e.body, e.var, Var(new))
            return Lam(new, substitute(body, x, v))
        return Lam(e.var, substitute(e.body, x, v))
    changes = {}
    for name in e.children:
        child = getattr(e, name)
        new_child = substitute(child, x, v)
        if new_child is not child:
            changes[name] = new_child
    return replace(e, **changes) if changes else e


# ---------------------------------------------------------------------------
# Evaluation contexts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    """One layer of an evaluation context: `node` with a hole at `field`."""

    node: Expr
    field: str


@dataclass(frozen=True)
class IsValue:
    value: Expr


@dataclass(frozen=True)
class Decomposition:
    context: tuple[Frame, ...]
    head: Expr


@dataclass(frozen=True)
class Stuck:
    context: tuple[Frame, ...]
    head: Expr


DecomposeResult = Union[IsValue, Decomposition, Stuck]


def plug(context: tuple[Frame, ...], e: Expr) -> Expr:
    for frame in reversed(context):
        e = with_child(frame.node, frame.field, e)
    return e


def _arith(op: str, a: Expr, b: Expr) -> Expr | None:
    if op == "+":
        if isinstance(a, Int) and isinstance(b, Int):
            n = a.n + b.n
        elif isinstance(a, Char) and isinstance(b, Int):
            return _char(ord(a.c) + b.n)
        elif isinstance(a, Int) and isinstance(b, Char):
            return _char(a.n + ord(b.c))
        else:
            return None
    else:
        if isinstance(a, Int) and isinstance(b, Int):
            n = a.n - b.n
        elif isinstance(a, Char) and isinstance(b, Char):
            n = ord(a.c) - ord(b.c)
        elif isinstance(a, Char) and isinstance(b, Int):
            return _char(ord(a.c) - b.n)
        else:
            return None
    if not INT_MIN <= n <= INT_MAX:
        return None
    return Int(n)


def _char(code: int) -> Expr | None:
    if 0 <= code <= 0x10FFFF:
        return Char(chr(code))
    return None


def eval_prim(op: str, a: Expr, b: Expr) -> Expr | None:
    """Primitive operator on values; None when the operation is undefined."""
    if op in ("+", "-"):
        return _arith(op, a, b)
    if op == "=":
        if is_data(a) and is_data(b):
            return boolean(a == b)
        return None
    if op in ("<", "<="):
        if isinstance(a, Int) and isinstance(b, Int):
            x, y = a.n, b.n
        elif isinstance(a, Char) and isinstance(b, Char):
            x, y = a.c, b.c
        else:
            return None
        return boolean(x < y if op == "<" else x <= y)
    return None


def _head_applicable(e: Expr) -> bool:
    """Whether some head rule can fire on `e`, ignoring the heap."""
    if isinstance(e, Cases):
        v = e.e
        if isinstance(v, Inl):
            return isinstance(e.left, Lam)
        if isinstance(v, Inr):
            return isinstance(e.right, Lam)
        return False
    if isinstance(e, (Fst, Snd)):
        return isinstance(e.e, Pair)
    if isinstance(e, App):
        return isinstance(e.f, Lam)
    if isinstance(e, Assert):
        return e.e == TRUE
    if isinstance(e, (Deref, AtomicDeref)):
        return isinstance(e.e, Loc)
    if isinstance(e, Assign):
        return isinstance(e.loc, Loc)
    if isinstance(e, CAS):
        return isinstance(e.loc, Loc) and is_data(e.old)
    if isinstance(e, AssignPVar):
        return isinstance(e.pvar, PVarId)
    if isinstance(e, Prim):
        return eval_prim(e.op, e.a, e.b) is not None
    return isinstance(e, (Ref, IOCall, Fork, CreatePVar))


def decompose(e: Expr) -> DecomposeResult:
    """Split `e` into a unique evaluation context and head redex."""
    if e.is_value:
        return IsValue(e)
    frames: list[Frame] = []
    while True:
        descended = False
        if isinstance(e, (Lam, Fork, Var, CreatePVar)):
            names: tuple[str, ...] = ()
        elif isinstance(e, Cases):
            names = ("e",)
        else:
            names = e.children
        for name in names:
            child = getattr(e, name)
            if not child.is_value:
                if isinstance(e, AssignPVar) and name == "val" and not isinstance(e.pvar, PVarId):
                    break
                frames.append(Frame(e, name))
                e = child
                descended = True
                break
        if descended:
            continue
        ctx = tuple(frames)
        if _head_applicable(e):
            return Decomposition(ctx, e)
        return Stuck(ctx, e)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_ESCAPES = {"\n": "\\n", "\t": "\\t", "\\": "\\\\", "\r": "\\r", "\0": "\\0"}


def _char_lit(c: str, quote: str) -> str:
    if c in _ESCAPES:
        return _ESCAPES[c]
    if c == quote:
        return "\\" + c
    return c


def show_value(v: Expr) -> str:
    """Literal form of a value as it appears in traces and env scripts."""
    if isinstance(v, Unit):
        return "()"
    if v == TRUE:
        return "true"
    if v == FALSE:
        return "false"
    if isinstance(v, Char):
        return "'" + _char_lit(v.c, "'") + "'"
    if isinstance(v, Int):
        return str(v.n)
    if isinstance(v, Loc):
        return f"#loc{v.n}"
    if isinstance(v, PVarId):
        return f"#pvar{v.n}"
    items = list_items(v)
    if items:
        if all(isinstance(i, Char) for i in items):
            return '"' + "".join(_char_lit(i.c, '"') for i in items) + '"'
        return "[" + ", ".join(show_value(i) for i in items) + "]"
    if isinstance(v, Inl):
        return f"inl({show_value(v.e)})"
    if isinstance(v, Inr):
        return f"inr({show_value(v.e)})"
    if isinstance(v, Pair):
        return f"({show_value(v.a)}, {show_value(v.b)})"
    return pretty(v)


def show_args(v: Expr) -> str:
    """Argument list of a call: unit prints empty, a pair prints as two args."""
    if isinstance(v, Unit):
        return ""
    if isinstance(v, Pair):
        return f"{show_value(v.a)}, {show_value(v.b)}"
    return show_value(v)


def pretty(e: Expr) -> str:
    """Surface-syntax rendering of a core expression; parses back to `e`."""
    if isinstance(e, (Unit, Char, Int, Loc, PVarId)):
        return show_value(e)
    if e == TRUE:
        return "true"
    if e == FALSE:
        return "false"
    items = list_items(e)
    if items:
        if all(isinstance(i, Char) for i in items):
            return show_value(e)
        return "[" + ", ".join(pretty(i) for i in items) + "]"
    if isinstance(e, Inl):
        return f"inl({pretty(e.e)})"
    if isinstance(e, Inr):
        return f"inr({pretty(e.e)})"
    if isinstance(e, Pair):
        return f"({pretty(e.a)}, {pretty(e.b)})"
    if isinstance(e, Lam):
        return f"(fun {e.var} -> {pretty(e.body)})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Cases):
        return f"cases({pretty(e.e)}, {pretty(e.left)}, {pretty(e.right)})"
    if isinstance(e, Fst):
        return f"fst({pretty(e.e)})"
    if isinstance(e, Snd):
        return f"snd({pretty(e.e)})"
    if isinstance(e, App):
        f = pretty(e.f)
        if not isinstance(e.f, (Var, App)):
            f = f"({f})" if not f.startswith("(") else f
        return f"{f}({pretty(e.a)})"
    if isinstance(e, Assert):
        return f"assert({pretty(e.e)})"
    if isinstance(e, Ref):
        return f"ref({pretty(e.e)})"
    if isinstance(e, Deref):
        return f"!({pretty(e.e)})"
    if isinstance(e, Assign):
        return f"({pretty(e.loc)} <- {pretty(e.val)})"
    if isinstance(e, IOCall):
        return f"{e.tag}({pretty(e.e)})"
    if isinstance(e, Fork):
        return f"fork({pretty(e.e)})"
    if isinstance(e, AtomicDeref):
        return f"<!({pretty(e.e)})>"
    if isinstance(e, CAS):
        return f"cas({pretty(e.loc)}, {pretty(e.old)}, {pretty(e.new)})"
    if isinstance(e, CreatePVar):
        if e.constraint is None:
            return "create_pvar()"
        return f"create_pvar({e.constraint})"
    if isinstance(e, AssignPVar):
        return f"assign_pvar({pretty(e.pvar)}, {pretty(e.val)})"
    if isinstance(e, Prim):
        return f"({pretty(e.a)} {e.op} {pretty(e.b)})"
    raise TypeError(f"not a core expression: {type(e).__name__}")


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(x.subterms())


@functools.lru_cache(maxsize=65536)
def sort_key(v) -> tuple:
    """Structural total order on values and place terms."""
    if isinstance(v, Unit):
        return (0,)
    if isinstance(v, Inl):
        return (1, sort_key(v.e))
    if isinstance(v, Inr):
        return (2, sort_key(v.e))
    if isinstance(v, Pair):
        return (3, sort_key(v.a), sort_key(v.b))
    if isinstance(v, Char):
        return (4, v.c)
    if isinstance(v, Int):
        return (5, v.n)
    if hasattr(v, "sort_key"):
        return v.sort_key()
    if isinstance(v, Loc):
        return (7, v.n)
    if isinstance(v, PVarId):
        return (8, v.n)
    return (9, pretty(v))
