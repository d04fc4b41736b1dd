"""Surface syntax for programs and its desugaring into core expressions.

Grammar (informal; `;` binds loosest, `let`/`fun` bodies extend right):

    expr   ::= stmt (';' expr)?
    stmt   ::= 'let' x ':=' expr 'in' expr
             | 'fn' f '(' x, ... ')' '{' expr '}' expr?
             | 'fun' x '->' expr | 'fun' '(' x, ... ')' '->' expr
             | 'if' expr 'then' stmt ('else' stmt)?
             | 'match' expr 'with' ('|' pat '=>' stmt)+
             | 'loop' '{' expr '}'
             | assign
    assign ::= cmp ('<-' stmt)?
    cmp    ::= cons (('=' | '<' | '<=' | '<>') cons)?
    cons   ::= add ('::' cons)?
    add    ::= unary (('+' | '-' | '++') unary)*
    unary  ::= '!' unary | 'not' unary | 'fork' unary | 'ref' unary | postfix
    postfix::= atom ('(' args ')' | '.' field)*

Calls `f(a, b)` pass the tuple `(a, b)`. A call whose callee is an unbound
name declared as an I/O tag becomes an I/O call.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

from iospec.lexer import IOLSyntaxError, TokenStream
from iospec.prophecy import CONSTRAINT_KEYWORDS, parse_constraint_tokens
from iospec.syntax import (
    CAS, CORE_TYPES, FALSE, NIL, TRUE, UNIT, App, Assert, Assign, AssignPVar,
    AtomicDeref, Cases, Char, CreatePVar, Deref, Expr, Fork, Fst, Inl, Inr, Int,
    IOCall, Lam, Pair, Prim, Ref, Snd, Var, _node, fresh_name, make_string,
    substitute, walk,
)


class UndeclaredTagError(IOLSyntaxError):
    """A call to an unbound name that the net does not declare as a tag."""


KEYWORDS = frozenset({
    "let", "in", "fn", "fun", "if", "then", "else", "match", "with", "loop",
    "fork", "ref", "not", "true", "false", "nil", "unit", "inl", "inr", "fst",
    "snd", "assert", "cases", "cas", "create_pvar", "cpvar", "assign_pvar",
})

APPEND = "_append"


@_node
class _Proj(Expr):
    """Record projection placeholder, resolved once all record shapes are known."""

    field: str
    e: Expr
    children = ("e",)


def _not(e: Expr) -> Expr:
    return Cases(e, Lam("_", FALSE), Lam("_", TRUE))


def _fix(f: str, fn: Expr) -> Expr:
    """Call-by-value fixed point of `fun f -> fn` (Z combinator)."""
    inner = Lam("_fix_x", App(Lam(f, fn), Lam("_fix_v", App(App(Var("_fix_x"), Var("_fix_x")), Var("_fix_v")))))
    return App(inner, inner)


def _bind_params(params: list[str], body: Expr) -> Expr:
    if not params:
        return Lam("_", body)
    if len(params) == 1:
        return Lam(params[0], body)
    arg = fresh_name("_args", body.fv | set(params))
    cursor: Expr = Var(arg)
    for i, p in enumerate(params):
        if i == len(params) - 1:
            proj = cursor
        else:
            proj = Fst(cursor)
            cursor = Snd(cursor)
        body = substitute(body, p, proj)
    return Lam(arg, body)


def _tuple(items: list[Expr]) -> Expr:
    if not items:
        return UNIT
    out = items[-1]
    for item in reversed(items[:-1]):
        out = Pair(item, out)
    return out


def _list(items: list[Expr], tail: Expr = NIL) -> Expr:
    out = tail
    for item in reversed(items):
        out = Inr(Pair(item, out))
    return out


@dataclass
class _Arm:
    kind: str  # 'nil' | 'cons' | 'inl' | 'inr' | 'true' | 'false' | 'pair' | 'wild' | 'var'
    names: tuple[str, ...]
    body: Expr


class _Parser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)
        self.records: dict[tuple[str, ...], None] = {}
        self.positions: dict[int, tuple[int, int]] = {}

    # -- helpers -----------------------------------------------------------

    def name(self) -> str:
        t = self.ts.tok
        n = self.ts.expect_ident()
        if n in KEYWORDS:
            self.ts.error(f"keyword {n!r} cannot be used as a name", t)
        return n

    def var(self, name: str, tok) -> Var:
        v = Var(name)
        self.positions[id(v)] = (tok.line, tok.col)
        return v

    def params(self) -> list[str]:
        self.ts.expect("(")
        out = []
        while not self.ts.at(")"):
            out.append(self.name())
            if not self.ts.accept(","):
                break
        self.ts.expect(")")
        return out

    def block(self) -> Expr:
        self.ts.expect("{")
        if self.ts.accept("}"):
            return UNIT
        e = self.expr()
        self.ts.expect("}")
        return e

    # -- grammar -----------------------------------------------------------

    def expr(self) -> Expr:
        first = self.stmt()
        if self.ts.accept(";"):
            if self.ts.at("}") or self.ts.at(")") or self.ts.at_kind("eof"):
                return first
            return App(Lam("_", self.expr()), first)
        return first

    def _starts_expr(self) -> bool:
        t = self.ts.tok
        if t.kind == "eof":
            return False
        return not (t.kind == "sym" and t.text in (")", "}", "]", ",", "|", ";"))

    def stmt(self) -> Expr:
        ts = self.ts
        if ts.accept("let"):
            x = self.name()
            ts.expect(":=")
            bound = self.expr()
            ts.expect("in")
            return App(Lam(x, self.expr()), bound)
        if ts.accept("fn"):
            f = self.name()
            params = self.params()
            body = self.block()
            fn = _bind_params(params, body)
            if f in fn.fv:
                fn = _fix(f, fn)
            ts.accept(";")
            rest = self.expr() if self._starts_expr() else UNIT
            return App(Lam(f, rest), fn)
        if ts.accept("fun"):
            if ts.at("("):
                params = self.params()
            else:
                params = [self.name()]
            ts.expect("->")
            return _bind_params(params, self.expr())
        if ts.accept("if"):
            cond = self.expr()
            ts.expect("then")
            then = self.stmt()
            other = self.stmt() if ts.accept("else") else UNIT
            return Cases(cond, Lam("_", then), Lam("_", other))
        if ts.accept("match"):
            return self.match()
        if ts.accept("loop"):
            body = self.block()
            step = Lam("_", App(Lam("_", App(Var("_loop"), UNIT)), body))
            return App(_fix("_loop", step), UNIT)
        return self.assign()

    def match(self) -> Expr:
        ts = self.ts
        scrutinee = self.expr()
        ts.expect("with")
        arms: list[_Arm] = []
        while ts.accept("|"):
            arms.append(self.arm())
        if not arms:
            ts.error("match needs at least one arm")
        kinds = [a.kind for a in arms]
        if kinds[0] in ("pair", "var"):
            if len(arms) != 1:
                ts.error("a pair or variable pattern must be the only arm")
            arm = arms[0]
            if arm.kind == "var":
                return App(Lam(arm.names[0], arm.body), scrutinee)
            return App(self._destructure(arm.names, arm.body), scrutinee)
        left = right = None
        for arm in arms:
            if arm.kind in ("nil", "inl", "true"):
                side = "left"
            elif arm.kind in ("cons", "inr", "false"):
                side = "right"
            else:
                side = "wild"
            fn = self._arm_fn(arm)
            if side in ("left", "wild") and left is None:
                left = fn
            if side in ("right", "wild") and right is None:
                right = fn
        stuck = Lam("_", Assert(FALSE))
        return Cases(scrutinee, left or stuck, right or stuck)

    def _destructure(self, names: tuple[str, ...], body: Expr) -> Lam:
        p = fresh_name("_pair", body.fv | set(names))
        body = substitute(body, names[0], Fst(Var(p)))
        body = substitute(body, names[1], Snd(Var(p)))
        return Lam(p, body)

    def _arm_fn(self, arm: _Arm) -> Lam:
        if arm.kind in ("inl", "inr"):
            return Lam(arm.names[0], arm.body)
        if arm.kind == "cons":
            return self._destructure(arm.names, arm.body)
        return Lam("_", arm.body)

    def arm(self) -> _Arm:
        ts = self.ts
        names: tuple[str, ...] = ()
        if ts.accept("["):
            ts.expect("]")
            kind = "nil"
        elif ts.accept("nil"):
            kind = "nil"
        elif ts.at("true") or ts.at("false"):
            kind = ts.advance().text
        elif ts.at("inl") or ts.at("inr"):
            kind = ts.advance().text
            ts.expect("(")
            names = (self.name(),)
            ts.expect(")")
        elif ts.accept("("):
            a = self.name()
            ts.expect(",")
            b = self.name()
            ts.expect(")")
            kind, names = "pair", (a, b)
        elif ts.tok.kind == "ident" and ts.tok.text == "_":
            ts.advance()
            kind = "wild"
        else:
            head = self.name()
            if ts.accept("::"):
                kind, names = "cons", (head, self.name())
            else:
                kind, names = "var", (head,)
        ts.expect("=>")
        return _Arm(kind, names, self.stmt())

    def assign(self) -> Expr:
        lhs = self.cmp()
        if self.ts.accept("<-"):
            return Assign(lhs, self.stmt())
        return lhs

    def cmp(self) -> Expr:
        lhs = self.cons()
        for op in ("=", "<=", "<>", "<"):
            if self.ts.accept(op):
                rhs = self.cons()
                if op == "<>":
                    return _not(Prim("=", lhs, rhs))
                return Prim(op, lhs, rhs)
        return lhs

    def cons(self) -> Expr:
        head = self.add()
        if self.ts.accept("::"):
            return Inr(Pair(head, self.cons()))
        return head

    def add(self) -> Expr:
        lhs = self.unary()
        while True:
            if self.ts.accept("++"):
                lhs = App(Var(APPEND), Pair(lhs, self.unary()))
            elif self.ts.at("+") or self.ts.at("-"):
                op = self.ts.advance().text
                lhs = Prim(op, lhs, self.unary())
            else:
                return lhs

    def unary(self) -> Expr:
        ts = self.ts
        if ts.accept("!"):
            return Deref(self.unary())
        if ts.accept("not"):
            return _not(self.unary())
        if ts.accept("fork"):
            return Fork(self.unary())
        if ts.accept("ref"):
            return Ref(self.unary())
        if ts.at("-"):
            ts.advance()
            if ts.at_kind("int"):
                return self.postfix(Int(-ts.advance().value))
            return Prim("-", Int(0), self.unary())
        return self.postfix(self.atom())

    def postfix(self, e: Expr) -> Expr:
        ts = self.ts
        while True:
            if ts.at("("):
                e = App(e, self.args())
            elif ts.at(".") and ts.peek().kind == "ident":
                ts.advance()
                e = _Proj(ts.advance().text, e)
            else:
                return e

    def args(self) -> Expr:
        ts = self.ts
        ts.expect("(")
        items = []
        while not ts.at(")"):
            items.append(self.expr())
            if not ts.accept(","):
                break
        ts.expect(")")
        return _tuple(items)

    def fixed_args(self, n: int) -> list[Expr]:
        t = self.ts.tok
        items = self.args()
        out = []
        for _ in range(n - 1):
            if not isinstance(items, Pair):
                self.ts.error(f"expected {n} arguments", t)
            out.append(items.a)
            items = items.b
        out.append(items)
        return out

    def atom(self) -> Expr:
        ts = self.ts
        t = ts.tok
        if t.kind == "int":
            ts.advance()
            return Int(t.value)
        if t.kind == "char":
            ts.advance()
            return Char(t.value)
        if t.kind == "string":
            ts.advance()
            return make_string(t.value)
        if ts.accept("("):
            if ts.accept(")"):
                return UNIT
            items = [self.expr()]
            while ts.accept(","):
                items.append(self.expr())
            ts.expect(")")
            return _tuple(items)
        if ts.accept("["):
            items = []
            while not ts.at("]"):
                items.append(self.expr())
                if not ts.accept(","):
                    break
            ts.expect("]")
            return _list(items)
        if ts.at("{"):
            if ts.peek().kind == "ident" and ts.peek(2).text == ":=":
                return self.record()
            return self.block()
        if ts.accept("<!"):
            e = self.expr()
            ts.expect(">")
            return AtomicDeref(e)
        if t.kind != "ident":
            ts.error(f"unexpected {ts.describe()}")
        word = t.text
        if word in ("true", "false", "nil", "unit"):
            ts.advance()
            return {"true": TRUE, "false": FALSE, "nil": NIL, "unit": UNIT}[word]
        if word in ("inl", "inr", "fst", "snd", "assert"):
            ts.advance()
            ctor = {"inl": Inl, "inr": Inr, "fst": Fst, "snd": Snd, "assert": Assert}[word]
            (arg,) = self.fixed_args(1)
            return ctor(arg)
        if word == "cases":
            ts.advance()
            return Cases(*self.fixed_args(3))
        if word == "cas":
            ts.advance()
            return CAS(*self.fixed_args(3))
        if word == "assign_pvar":
            ts.advance()
            return AssignPVar(*self.fixed_args(2))
        if word in ("create_pvar", "cpvar"):
            ts.advance()
            ts.expect("(")
            if ts.accept(")"):
                if word == "cpvar":
                    ts.error("cpvar needs a constraint", t)
                return CreatePVar(None)
            if not any(ts.at(k) for k in CONSTRAINT_KEYWORDS):
                ts.error(f"expected a constraint literal, found {ts.describe()}")
            c = parse_constraint_tokens(ts)
            ts.expect(")")
            return CreatePVar(c)
        if word in KEYWORDS:
            ts.error(f"unexpected keyword {word!r}", t)
        ts.advance()
        return self.var(word, t)

    def record(self) -> Expr:
        ts = self.ts
        ts.expect("{")
        fields: dict[str, Expr] = {}
        while not ts.at("}"):
            t = ts.tok
            f = ts.expect_ident()
            if f in fields:
                ts.error(f"duplicate field {f!r}", t)
            ts.expect(":=")
            fields[f] = self.stmt()
            if not ts.accept(";"):
                break
        ts.expect("}")
        names = tuple(sorted(fields))
        self.records[names] = None
        return _tuple([fields[n] for n in names])

    # -- post passes -------------------------------------------------------

    def resolve_projections(self, e: Expr) -> Expr:
        table: dict[str, tuple[int, int]] = {}
        for names in self.records:
            for i, f in enumerate(names):
                shape = (i, len(names))
                if table.setdefault(f, shape) != shape:
                    raise IOLSyntaxError(f"field {f!r} is used by records of different shapes")

        @functools.lru_cache(maxsize=None)
        def go(x: Expr) -> Expr:
            if isinstance(x, _Proj):
                inner = go(x.e)
                if x.field not in table:
                    raise IOLSyntaxError(f"unknown record field {x.field!r}")
                i, n = table[x.field]
                for _ in range(i):
                    inner = Snd(inner)
                return inner if i == n - 1 else Fst(inner)
            if not x.children:
                return x
            changes = {}
            for name in x.children:
                child = getattr(x, name)
                new = go(child)
                if new is not child:
                    changes[name] = new
            if not changes:
                return x
            return replace(x, **changes)

        return go(e)


PRELUDE_SOURCE = {
    "append": "fn append(xs, ys) { match xs with | [] => ys | h :: t => h :: append(t, ys) } append",
    "length": "fn length(xs) { match xs with | [] => 0 | h :: t => 1 + length(t) } length",
}


@functools.lru_cache(maxsize=None)
def _prelude(name: str) -> Expr:
    return parse_program(PRELUDE_SOURCE[name], tags=frozenset())


def _resolve_names(e: Expr, tags, positions, allow_free: bool) -> tuple[Expr, set[str]]:
    """Turn calls of unbound tag names into I/O calls; report unbound names."""
    used: set[str] = set()

    def err(cls, msg, node):
        line, col = positions.get(id(node), (0, 0))
        raise cls(msg, line, col)

    def go(x: Expr, bound: frozenset[str]) -> Expr:
        if not (x.fv - bound):
            return x
        if isinstance(x, Var):
            if x.name in PRELUDE_SOURCE or x.name == APPEND:
                used.add(x.name)
                return x
            if allow_free:
                return x
            err(IOLSyntaxError, f"unbound variable {x.name!r}", x)
        if isinstance(x, App) and isinstance(x.f, Var) and x.f.name not in bound:
            name = x.f.name
            if name not in PRELUDE_SOURCE and name != APPEND:
                if tags is None or name in tags:
                    return IOCall(name, go(x.a, bound))
                if not allow_free:
                    err(UndeclaredTagError, f"call of undeclared I/O tag {name!r}", x.f)
        if isinstance(x, Lam):
            body = go(x.body, bound | {x.var})
            return x if body is x.body else Lam(x.var, body)
        changes = {}
        for name in x.children:
            child = getattr(x, name)
            new = go(child, bound)
            if new is not child:
                changes[name] = new
        if not changes:
            return x
        return replace(x, **changes)

    return go(e, frozenset()), used


def parse_program(text: str, tags=None, allow_free: bool = False) -> Expr:
    """Parse and desugar a program.

    `tags` is the set of declared I/O tags; None accepts any unbound callee
    as a tag. With `allow_free`, unbound non-tag names stay free variables.
    """
    p = _Parser(text)
    e = p.expr()
    if not p.ts.at_kind("eof"):
        p.ts.error(f"unexpected {p.ts.describe()}")
    e = p.resolve_projections(e)
    e, used = _resolve_names(e, None if tags is None else frozenset(tags), p.positions, allow_free)
    if APPEND in used:
        e = App(Lam(APPEND, e), Var("append"))
        used.discard(APPEND)
        used.add("append")
    for name in sorted(used):
        e = App(Lam(name, e), _prelude(name))
    return e


def is_core(e: Expr) -> bool:
    """True when no sugar node remains anywhere in `e`."""
    return all(type(x) in CORE_TYPES for x in walk(e))
