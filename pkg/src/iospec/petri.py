"""Petri nets over term-shaped places.

A net is a finite set of rule schemas. Places are ground terms
(`p1`, `pc("hi")`, `r("n1", ["a"])`); rules mention pattern variables
(identifiers starting with an uppercase letter) so that one schema can
stand for an infinite family of transitions.

Net file format:

    tags putchar, getchar;
    place p1, p2, p3;                       // optional; enables name checking
    init p1;                                // '+'-separated place terms
    io putchar(p1, 'h', (), p2);            // io tag(pre, arg, result, post)
    io getchar(p1, (), C, p2(C)) where 'a' <= C <= 'z';
    open receive(r([]), ());                // allowed, but results lie beyond the horizon
    split(p, q1, q2);  join(p1, p2, q);  noop(p, q);
    accept p3;                              // reporting only
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator

from iospec.lexer import IOLSyntaxError, TokenStream, parse_literal
from iospec.syntax import (
    NIL, UNIT, Char, Inl, Inr, Int, Pair, TRUE, cons, eval_prim, list_items,
    make_list, show_args, show_value, sort_key,
)


class NetError(IOLSyntaxError):
    """Malformed net file or ill-scoped rule."""


class ClosureTruncated(Exception):
    """Silent closure hit its depth bound while still growing."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NotEnumerable(Exception):
    """A rule's argument cannot be enumerated from its pre-place and guards."""


# ---------------------------------------------------------------------------
# Places and markings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Place:
    name: str
    args: tuple = ()

    def sort_key(self) -> tuple:
        return (6, self.name, tuple(sort_key(a) for a in self.args))

    def __str__(self) -> str:
        return show_place(self)

    __repr__ = __str__


def show_place(p) -> str:
    if not isinstance(p, Place):
        return show_value(p)
    if not p.args:
        return p.name
    return p.name + "(" + ", ".join(show_place(a) for a in p.args) + ")"


Marking = tuple  # sorted tuple of Place


def marking(places: Iterable[Place]) -> Marking:
    return tuple(sorted(places, key=sort_key))


def marking_union(a: Marking, b: Marking) -> Marking:
    return marking(a + b)


def marking_key(m: Marking) -> tuple:
    return tuple(sort_key(p) for p in m)


def show_marking(m: Marking) -> str:
    return "{" + ", ".join(show_place(p) for p in m) + "}"


def sorted_markings(ms: Iterable[Marking]) -> list[Marking]:
    return sorted(ms, key=lambda m: (len(m), marking_key(m)))


# ---------------------------------------------------------------------------
# Terms: patterns on the way in, constructors on the way out
# ---------------------------------------------------------------------------


class Term:
    pass


@dataclass(frozen=True)
class TVar(Term):
    name: str


@dataclass(frozen=True)
class TWild(Term):
    pass


@dataclass(frozen=True)
class TLit(Term):
    value: object


@dataclass(frozen=True)
class TPlace(Term):
    name: str
    args: tuple


@dataclass(frozen=True)
class TCons(Term):
    head: Term
    tail: Term


@dataclass(frozen=True)
class TPair(Term):
    a: Term
    b: Term


@dataclass(frozen=True)
class TInj(Term):
    left: bool
    e: Term


@dataclass(frozen=True)
class TOp(Term):
    op: str  # '+' | '-' | '++'
    a: Term
    b: Term


def _sub_terms(t: Term) -> tuple:
    if isinstance(t, TPlace):
        return t.args
    if isinstance(t, TCons):
        return (t.head, t.tail)
    if isinstance(t, (TPair, TOp)):
        return (t.a, t.b)
    if isinstance(t, TInj):
        return (t.e,)
    return ()


def term_vars(t: Term) -> set[str]:
    if isinstance(t, TVar):
        return {t.name}
    out: set[str] = set()
    for s in _sub_terms(t):
        out |= term_vars(s)
    return out


def pattern_binds(t: Term) -> set[str]:
    """Variables a match against `t` can bind (those outside operators)."""
    if isinstance(t, TVar):
        return {t.name}
    if isinstance(t, TOp):
        return set()
    out: set[str] = set()
    for s in _sub_terms(t):
        out |= pattern_binds(s)
    return out


def pattern_uses(t: Term) -> set[str]:
    """Variables that must already be bound to match against `t`."""
    if isinstance(t, TOp):
        return term_vars(t)
    out: set[str] = set()
    for s in _sub_terms(t):
        out |= pattern_uses(s)
    return out


class _Undefined(Exception):
    pass


def build(t: Term, env: dict):
    """Construct the ground value denoted by `t`; raises _Undefined."""
    if isinstance(t, TVar):
        if t.name not in env:
            raise KeyError(t.name)
        return env[t.name]
    if isinstance(t, TLit):
        return t.value
    if isinstance(t, TPlace):
        return Place(t.name, tuple(build(a, env) for a in t.args))
    if isinstance(t, TCons):
        return cons(build(t.head, env), build(t.tail, env))
    if isinstance(t, TPair):
        return Pair(build(t.a, env), build(t.b, env))
    if isinstance(t, TInj):
        inner = build(t.e, env)
        return Inl(inner) if t.left else Inr(inner)
    if isinstance(t, TOp):
        a, b = build(t.a, env), build(t.b, env)
        if t.op == "++":
            xs, ys = list_items(a), list_items(b)
            if xs is None or ys is None:
                raise _Undefined
            return make_list(xs + ys)
        if isinstance(a, Place) or isinstance(b, Place):
            raise _Undefined
        out = eval_prim(t.op, a, b)
        if out is None:
            raise _Undefined
        return out
    raise _Undefined


def match(t: Term, v, env: dict) -> dict | None:
    if isinstance(t, TWild):
        return env
    if isinstance(t, TVar):
        if t.name in env:
            return env if env[t.name] == v else None
        out = dict(env)
        out[t.name] = v
        return out
    if isinstance(t, (TLit, TOp)):
        try:
            return env if build(t, env) == v else None
        except _Undefined:
            return None
    if isinstance(t, TPlace):
        if not isinstance(v, Place) or v.name != t.name or len(v.args) != len(t.args):
            return None
        for sub, val in zip(t.args, v.args):
            env = match(sub, val, env)
            if env is None:
                return None
        return env
    if isinstance(t, TCons):
        if not (isinstance(v, Inr) and isinstance(v.e, Pair)):
            return None
        env = match(t.head, v.e.a, env)
        return None if env is None else match(t.tail, v.e.b, env)
    if isinstance(t, TPair):
        if not isinstance(v, Pair):
            return None
        env = match(t.a, v.a, env)
        return None if env is None else match(t.b, v.b, env)
    if isinstance(t, TInj):
        if not isinstance(v, Inl if t.left else Inr):
            return None
        return match(t.e, v.e, env)
    return None


def show_term(t: Term) -> str:
    if isinstance(t, TVar):
        return t.name
    if isinstance(t, TWild):
        return "_"
    if isinstance(t, TLit):
        return show_place(t.value)
    if isinstance(t, TPlace):
        if not t.args:
            return t.name
        return t.name + "(" + ", ".join(show_term(a) for a in t.args) + ")"
    if isinstance(t, TCons):
        return f"{show_term(t.head)} :: {show_term(t.tail)}"
    if isinstance(t, TPair):
        return f"({show_term(t.a)}, {show_term(t.b)})"
    if isinstance(t, TInj):
        return ("inl(" if t.left else "inr(") + show_term(t.e) + ")"
    if isinstance(t, TOp):
        return f"({show_term(t.a)} {t.op} {show_term(t.b)})"
    return "?"


# ---------------------------------------------------------------------------
# Guards
# ---------------------------------------------------------------------------

MAX_RANGE = 1 << 16


class Guard:
    pass


@dataclass(frozen=True)
class Compare(Guard):
    """Chain `t0 op t1 [op t2]` with op in {<, <=}; a bare middle variable
    between bound ends is enumerated."""

    terms: tuple
    ops: tuple


@dataclass(frozen=True)
class Equal(Guard):
    lhs: Term
    rhs: Term
    negate: bool = False


@dataclass(frozen=True)
class Member(Guard):
    term: Term
    values: tuple


def _bound(t: Term, env: dict) -> bool:
    return term_vars(t) <= env.keys()


def _enum_range(lo, hi, lo_op: str, hi_op: str) -> list:
    if isinstance(lo, Char) and isinstance(hi, Char):
        a, b = ord(lo.c), ord(hi.c)
        mk = lambda n: Char(chr(n))  # noqa: E731
    elif isinstance(lo, Int) and isinstance(hi, Int):
        a, b = lo.n, hi.n
        mk = Int
    else:
        return []
    if lo_op == "<":
        a += 1
    if hi_op == "<":
        b -= 1
    if b - a + 1 > MAX_RANGE:
        raise NetError(f"range guard enumerates more than {MAX_RANGE} values")
    return [mk(n) for n in range(a, b + 1)]


def solve_guard(g: Guard, env: dict) -> Iterator[dict]:
    try:
        if isinstance(g, Compare):
            terms = g.terms
            if (len(terms) == 3 and isinstance(terms[1], TVar) and terms[1].name not in env
                    and _bound(terms[0], env) and _bound(terms[2], env)):
                lo, hi = build(terms[0], env), build(terms[2], env)
                for v in _enum_range(lo, hi, g.ops[0], g.ops[1]):
                    out = dict(env)
                    out[terms[1].name] = v
                    yield out
                return
            values = [build(t, env) for t in terms]
            for op, a, b in zip(g.ops, values, values[1:]):
                if isinstance(a, Place) or isinstance(b, Place) or eval_prim(op, a, b) != TRUE:
                    return
            yield env
        elif isinstance(g, Equal):
            if not g.negate and not _bound(g.lhs, env) and _bound(g.rhs, env):
                out = match(g.lhs, build(g.rhs, env), env)
            elif not g.negate and not _bound(g.rhs, env) and _bound(g.lhs, env):
                out = match(g.rhs, build(g.lhs, env), env)
            else:
                same = build(g.lhs, env) == build(g.rhs, env)
                out = env if same != g.negate else None
            if out is not None:
                yield out
        elif isinstance(g, Member):
            if _bound(g.term, env):
                if build(g.term, env) in g.values:
                    yield env
                return
            for v in g.values:
                out = match(g.term, v, env)
                if out is not None:
                    yield out
    except _Undefined:
        return


def solve_guards(guards: tuple, env: dict) -> Iterator[dict]:
    if not guards:
        yield env
        return
    for out in solve_guard(guards[0], env):
        yield from solve_guards(guards[1:], out)


def _guard_scope(g: Guard, bound: set[str]) -> tuple[set[str], set[str]]:
    """(variables required, variables newly bound) for a guard."""
    if isinstance(g, Compare):
        t = g.terms
        if (len(t) == 3 and isinstance(t[1], TVar) and t[1].name not in bound
                and term_vars(t[0]) <= bound and term_vars(t[2]) <= bound):
            return set(), {t[1].name}
        return set().union(*(term_vars(x) for x in t)), set()
    if isinstance(g, Equal):
        if not g.negate:
            for pat, other in ((g.lhs, g.rhs), (g.rhs, g.lhs)):
                if term_vars(other) <= bound and not term_vars(pat) <= bound:
                    return pattern_uses(pat), pattern_binds(pat)
        return term_vars(g.lhs) | term_vars(g.rhs), set()
    if isinstance(g, Member):
        if term_vars(g.term) <= bound:
            return term_vars(g.term), set()
        return pattern_uses(g.term), pattern_binds(g.term)
    return set(), set()


def show_guard(g: Guard) -> str:
    if isinstance(g, Compare):
        parts = [show_term(g.terms[0])]
        for op, t in zip(g.ops, g.terms[1:]):
            parts += [op, show_term(t)]
        return " ".join(parts)
    if isinstance(g, Equal):
        return f"{show_term(g.lhs)} {'<>' if g.negate else '='} {show_term(g.rhs)}"
    if isinstance(g, Member):
        return f"{show_term(g.term)} in [" + ", ".join(show_value(v) for v in g.values) + "]"
    return "?"


# ---------------------------------------------------------------------------
# Rules and nets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    kind: str  # 'io' | 'open' | 'split' | 'join' | 'noop'
    pre: tuple
    post: tuple
    tag: str | None = None
    arg: Term | None = None
    result: Term | None = None
    guards: tuple = ()
    line: int = 0
    # Whether the argument can be computed without being given (needed
    # by the brute-force trace enumeration and the ResDet check).
    arg_enumerable: bool = True

    @property
    def silent(self) -> bool:
        return self.kind in ("split", "join", "noop")

    def __str__(self) -> str:
        if self.kind == "io":
            body = f"io {self.tag}({show_term(self.pre[0])}, {show_term(self.arg)}, {show_term(self.result)}, {show_term(self.post[0])})"
        elif self.kind == "open":
            body = f"open {self.tag}({show_term(self.pre[0])}, {show_term(self.arg)})"
        else:
            body = f"{self.kind}(" + ", ".join(show_term(t) for t in self.pre + self.post) + ")"
        if self.guards:
            body += " where " + ", ".join(show_guard(g) for g in self.guards)
        return body + ";"


@dataclass(frozen=True)
class Net:
    tags: tuple[str, ...]
    rules: tuple[Rule, ...]
    init: Marking
    accepting: tuple = ()
    places: tuple[str, ...] = ()
    name: str = ""

    @property
    def silent_rules(self) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.silent)

    def io_rules(self, tag: str | None = None) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.kind == "io" and (tag is None or r.tag == tag))

    def open_rules(self, tag: str) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.kind == "open" and r.tag == tag)

    def __str__(self) -> str:
        lines = [f"tags {', '.join(self.tags)};" if self.tags else "tags;"]
        if self.places:
            lines.append(f"place {', '.join(self.places)};")
        lines.append("init " + " + ".join(show_place(p) for p in self.init) + ";")
        lines += [str(r) for r in self.rules]
        if self.accepting:
            lines.append("accept " + " + ".join(show_place(p) for p in self.accepting) + ";")
        return "\n".join(lines) + "\n"


def _check_rule(rule: Rule, tags: set[str], places: set[str], tok) -> Rule:
    def fail(msg):
        raise NetError(msg, tok.line, tok.col)

    if rule.tag is not None and rule.tag not in tags:
        fail(f"I/O tag {rule.tag!r} is not declared")
    if places:
        for t in rule.pre + rule.post:
            for name in _place_names(t):
                if name not in places:
                    fail(f"place {name!r} is not declared")
    for t in rule.pre:
        if not isinstance(t, (TPlace, TVar)):
            fail("pre-place must be a place term")
        if pattern_uses(t):
            fail("arithmetic is not allowed in pre-place patterns")

    def scope(bound: set[str]) -> set[str]:
        bound = set(bound)
        for g in rule.guards:
            need, new = _guard_scope(g, bound)
            if not need <= bound:
                return None
            bound |= new
        return bound

    bound = set().union(*(pattern_binds(t) for t in rule.pre)) if rule.pre else set()
    if rule.arg is not None:
        if not pattern_uses(rule.arg) <= bound:
            fail("argument pattern uses variables not bound by the pre-place")
        full = scope(bound | pattern_binds(rule.arg))
    else:
        full = scope(bound)
    if full is None:
        fail("guard uses a variable before it is bound")
    outs = rule.post + ((rule.result,) if rule.result is not None else ())
    for t in outs:
        missing = term_vars(t) - full
        if missing:
            fail(f"variable {sorted(missing)[0]} is not bound by the pre-place, argument or a guard")
    enumerable = True
    if rule.arg is not None:
        without_arg = scope(bound)
        enumerable = without_arg is not None and term_vars(rule.arg) <= without_arg
    return Rule(rule.kind, rule.pre, rule.post, rule.tag, rule.arg, rule.result,
                rule.guards, rule.line, enumerable)


def _place_names(t: Term) -> set[str]:
    out = set()
    if isinstance(t, TPlace):
        out.add(t.name)
    for s in _sub_terms(t):
        out |= _place_names(s)
    return out


# ---------------------------------------------------------------------------
# Net DSL parser
# ---------------------------------------------------------------------------

_LITERAL_WORDS = {"unit": UNIT, "true": TRUE, "false": Inr(UNIT), "nil": NIL}


class _NetParser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)

    def error(self, msg, tok=None):
        t = tok or self.ts.tok
        raise NetError(msg, t.line, t.col)

    def term(self) -> Term:
        head = self.add_term()
        if self.ts.accept("::"):
            return TCons(head, self.term())
        return head

    def add_term(self) -> Term:
        lhs = self.atom_term()
        while self.ts.at("+") or self.ts.at("-") or self.ts.at("++"):
            op = self.ts.advance().text
            lhs = TOp(op, lhs, self.atom_term())
        return lhs

    def atom_term(self) -> Term:
        ts = self.ts
        t = ts.tok
        if t.kind in ("int", "char", "string") or (ts.at("-") and ts.peek().kind == "int"):
            return TLit(parse_literal(ts))
        if ts.accept("("):
            if ts.accept(")"):
                return TLit(UNIT)
            items = [self.term()]
            while ts.accept(","):
                items.append(self.term())
            ts.expect(")")
            return _fold_pair(items)
        if ts.accept("["):
            items = []
            while not ts.at("]"):
                items.append(self.term())
                if not ts.accept(","):
                    break
            ts.expect("]")
            out: Term = TLit(NIL)
            for item in reversed(items):
                out = TCons(item, out)
            return _fold_lits(out)
        if t.kind != "ident":
            self.error(f"expected a term, found {ts.describe()}")
        word = ts.advance().text
        if word == "_":
            return TWild()
        if word in _LITERAL_WORDS:
            return TLit(_LITERAL_WORDS[word])
        if word in ("inl", "inr"):
            ts.expect("(")
            inner = self.term()
            ts.expect(")")
            return _fold_lits(TInj(word == "inl", inner))
        if word[0].isupper():
            return TVar(word)
        args: list[Term] = []
        if ts.accept("("):
            while not ts.at(")"):
                args.append(self.term())
                if not ts.accept(","):
                    break
            ts.expect(")")
        return TPlace(word, tuple(args))

    def guard(self) -> Guard:
        ts = self.ts
        first = self.term()
        if ts.at("<=") or ts.at("<"):
            terms, ops = [first], []
            while ts.at("<=") or ts.at("<"):
                ops.append(ts.advance().text)
                terms.append(self.term())
            if len(terms) > 3:
                self.error("comparison chains have at most three terms")
            return Compare(tuple(terms), tuple(ops))
        if ts.accept("="):
            return Equal(first, self.term())
        if ts.accept("<>"):
            return Equal(first, self.term(), negate=True)
        if ts.accept("in"):
            ts.expect("[")
            values = []
            while not ts.at("]"):
                values.append(parse_literal(ts))
                if not ts.accept(","):
                    break
            ts.expect("]")
            return Member(first, tuple(values))
        self.error(f"expected a guard operator, found {ts.describe()}")

    def guards(self) -> tuple:
        if not self.ts.accept("where"):
            return ()
        out = [self.guard()]
        while self.ts.accept(",") or self.ts.accept("and"):
            out.append(self.guard())
        return tuple(out)

    def args(self, n: int, what: str) -> list[Term]:
        ts = self.ts
        t = ts.tok
        ts.expect("(")
        items = [self.term()]
        while ts.accept(","):
            items.append(self.term())
        ts.expect(")")
        if len(items) != n:
            self.error(f"{what} takes {n} arguments", t)
        return items

    def places_sum(self) -> list:
        items = [self.atom_term()]
        while self.ts.accept("+"):
            items.append(self.atom_term())
        out = []
        for t in items:
            if not isinstance(t, TPlace) or term_vars(t):
                self.error("markings consist of ground place terms")
            out.append(build(t, {}))
        return out

    def parse(self, name: str = "") -> Net:
        ts = self.ts
        tags: list[str] = []
        places: list[str] = []
        init = None
        accepting: list = []
        raw: list[tuple[Rule, object]] = []
        while not ts.at_kind("eof"):
            tok = ts.tok
            if ts.accept("tags"):
                if not ts.at(";"):
                    tags.append(ts.expect_ident())
                    while ts.accept(","):
                        tags.append(ts.expect_ident())
            elif ts.accept("place"):
                places.append(ts.expect_ident())
                while ts.accept(","):
                    places.append(ts.expect_ident())
            elif ts.accept("init"):
                if init is not None:
                    self.error("duplicate init declaration", tok)
                init = self.places_sum()
            elif ts.accept("accept"):
                accepting += self.places_sum()
            elif ts.accept("io"):
                tag = ts.expect_ident()
                pre, arg, res, post = self.args(4, "io rule")
                raw.append((Rule("io", (pre,), (post,), tag, arg, res, self.guards(), tok.line), tok))
            elif ts.accept("open"):
                tag = ts.expect_ident()
                pre, arg = self.args(2, "open rule")
                raw.append((Rule("open", (pre,), (pre,), tag, arg, None, self.guards(), tok.line), tok))
            elif ts.at("split") or ts.at("join") or ts.at("noop"):
                kind = ts.advance().text
                n = 2 if kind == "noop" else 3
                items = self.args(n, kind)
                if kind == "split":
                    pre, post = items[:1], items[1:]
                elif kind == "join":
                    pre, post = items[:2], items[2:]
                else:
                    pre, post = items[:1], items[1:]
                raw.append((Rule(kind, tuple(pre), tuple(post), guards=self.guards(), line=tok.line), tok))
            else:
                self.error(f"expected a declaration, found {ts.describe()}")
            ts.expect(";")
        if init is None:
            raise NetError("missing init declaration")
        tagset, placeset = set(tags), set(places)
        rules = tuple(_check_rule(r, tagset, placeset, tok) for r, tok in raw)
        if placeset:
            for p in init + accepting:
                if p.name not in placeset:
                    raise NetError(f"place {p.name!r} is not declared")
        return Net(tuple(tags), rules, marking(init), tuple(accepting), tuple(places), name)


def _fold_pair(items: list[Term]) -> Term:
    out = items[-1]
    for item in reversed(items[:-1]):
        out = TPair(item, out)
    return _fold_lits(out)


def _fold_lits(t: Term) -> Term:
    """Collapse a constructor term whose leaves are all literals."""
    if term_vars(t) or _has(t, (TWild, TPlace, TOp)):
        return t
    return TLit(build(t, {}))


def _has(t: Term, kinds) -> bool:
    return isinstance(t, kinds) or any(_has(s, kinds) for s in _sub_terms(t))


def parse_net(text: str, name: str = "") -> Net:
    return _NetParser(text).parse(name)


def load_net(path) -> Net:
    from pathlib import Path
    p = Path(path)
    return parse_net(p.read_text(encoding="utf-8"), p.stem)


# ---------------------------------------------------------------------------
# Firing
# ---------------------------------------------------------------------------


def _pre_choices(m: Marking, n: int) -> Iterator[tuple[tuple, Marking]]:
    """Distinct ways to take `n` tokens (ordered) from `m`, with the rest."""
    seen = set()
    for idx in itertools.permutations(range(len(m)), n):
        chosen = tuple(m[i] for i in idx)
        if chosen in seen:
            continue
        seen.add(chosen)
        rest = tuple(p for i, p in enumerate(m) if i not in idx)
        yield chosen, rest


def _instances(rule: Rule, m: Marking, env0: dict | None = None, arg=None) -> Iterator[tuple[dict, Marking]]:
    for chosen, rest in _pre_choices(m, len(rule.pre)):
        env = {} if env0 is None else env0
        for pat, place in zip(rule.pre, chosen):
            env = match(pat, place, env)
            if env is None:
                break
        if env is None:
            continue
        if arg is not None:
            env = match(rule.arg, arg, env)
            if env is None:
                continue
        for out in solve_guards(rule.guards, env):
            yield out, rest


def _post(rule: Rule, env: dict, rest: Marking) -> Marking | None:
    try:
        return marking(rest + tuple(build(t, env) for t in rule.post))
    except _Undefined:
        return None


def silent_successors(net: Net, m: Marking) -> set[Marking]:
    out = set()
    for rule in net.silent_rules:
        for env, rest in _instances(rule, m):
            new = _post(rule, env, rest)
            if new is not None:
                out.add(new)
    return out


def silent_closure(net: Net, markings: Iterable[Marking], bound: int = 64) -> tuple[frozenset, bool]:
    """Markings reachable by at most `bound` silent firings, and whether the
    closure was still growing at the bound."""
    seen = set(markings)
    frontier = set(seen)
    if not net.silent_rules:
        return frozenset(seen), False
    for _ in range(bound):
        nxt = set()
        for m in frontier:
            nxt |= silent_successors(net, m)
        frontier = nxt - seen
        if not frontier:
            return frozenset(seen), False
        seen |= frontier
    for m in frontier:
        if silent_successors(net, m) - seen:
            return frozenset(seen), True
    return frozenset(seen), False


def fire_io(net: Net, markings: Iterable[Marking], tag: str, arg) -> dict:
    """One labeled firing for `tag(arg)` from each marking (no closure).
    Returns {result: set of markings}."""
    out: dict = {}
    rules = net.io_rules(tag)
    for m in markings:
        for rule in rules:
            for env, rest in _instances(rule, m, arg=arg):
                try:
                    res = build(rule.result, env)
                except _Undefined:
                    continue
                new = _post(rule, env, rest)
                if new is not None:
                    out.setdefault(res, set()).add(new)
    return out


def horizon_open(net: Net, markings: Iterable[Marking], tag: str, arg) -> bool:
    """Whether an `open` rule admits `tag(arg)` from one of the markings."""
    rules = net.open_rules(tag)
    if not rules:
        return False
    for m in markings:
        for rule in rules:
            for _ in _instances(rule, m, arg=arg):
                return True
    return False


def sort_results(results: dict) -> dict:
    return {k: results[k] for k in sorted(results, key=sort_key)}


def io_successors(net: Net, markings: Iterable[Marking], tag: str, arg, bound: int = 64) -> dict:
    """{result: markings after silent closure then one `tag(arg)` firing}."""
    if tag not in net.tags:
        raise NetError(f"I/O tag {tag!r} is not declared")
    closed, truncated = silent_closure(net, markings, bound)
    out = sort_results({k: frozenset(v) for k, v in fire_io(net, closed, tag, arg).items()})
    if truncated:
        raise ClosureTruncated(f"silent closure exceeded {bound} steps", partial=out)
    return out


def enabled_actions(net: Net, m: Marking) -> Iterator[tuple[str, object, object, Marking]]:
    """All labeled firings (tag, arg, result, marking') from `m`, enumerating
    arguments through the pre-place and guards."""
    for rule in net.io_rules():
        if not rule.arg_enumerable:
            raise NotEnumerable(f"argument of rule at line {rule.line} cannot be enumerated: {rule}")
        for env, rest in _instances(rule, m):
            try:
                arg = build(rule.arg, env)
                res = build(rule.result, env)
            except _Undefined:
                continue
            new = _post(rule, env, rest)
            if new is not None:
                yield rule.tag, arg, res, new


Action = tuple  # (tag, arg, result)


def show_action(a: Action) -> str:
    tag, arg, res = a
    return f"{tag}({show_args(arg)}) -> {show_value(res)}"


def traces_upto(net: Net, init: Marking, k: int, bound: int = 64) -> set[tuple]:
    """All traces of length <= k firable from `init`, by direct enumeration
    of individual firings (the reference oracle)."""
    traces = {()}
    # best[(marking, trace)] = fewest consecutive silent firings used to reach it
    best: dict = {}
    stack = [(init, (), 0)]
    truncated = False
    while stack:
        m, tr, silent = stack.pop()
        key = (m, tr)
        if key in best and best[key] <= silent:
            continue
        best[key] = silent
        traces.add(tr)
        for new in silent_successors(net, m):
            if silent < bound:
                stack.append((new, tr, silent + 1))
            elif (new, tr) not in best:
                truncated = True
        if len(tr) < k:
            for tag, arg, res, new in enabled_actions(net, m):
                stack.append((new, tr + ((tag, arg, res),), 0))
    if truncated:
        missing = False
        # Only a real truncation if the bounded successors were never reached.
        for (m, tr), silent in best.items():
            if silent >= bound:
                for new in silent_successors(net, m):
                    if (new, tr) not in best:
                        missing = True
        if missing:
            raise ClosureTruncated(f"silent firings exceeded {bound} steps")
    return traces


def is_prefix_closed(traces: set[tuple]) -> bool:
    return all(t[:-1] in traces for t in traces if t)


@dataclass(frozen=True)
class ResDetOk:
    explored: int


@dataclass(frozen=True)
class ResDetCounterexample:
    trace: tuple
    tag: str
    arg: object
    result1: object
    result2: object

    def __str__(self) -> str:
        tr = " . ".join(show_action(a) for a in self.trace) or "ε"
        return (f"after [{tr}], {self.tag}({show_args(self.arg)}) admits results "
                f"{show_value(self.result1)} and {show_value(self.result2)}")


def _trace_key(tr: tuple) -> tuple:
    return tuple((tag, sort_key(a), sort_key(r)) for tag, a, r in tr)


def check_result_det(net: Net, init: Marking, k: int = 4, bound: int = 64):
    """Breadth-first search over derivatives for a trace shorter than `k`
    after which some action admits two distinct results."""
    start, trunc = silent_closure(net, [init], bound)
    if trunc:
        raise ClosureTruncated(f"silent closure exceeded {bound} steps")
    level = [((), start)]
    seen = {start}
    explored = 0
    for _ in range(k):
        nxt = []
        for tr, state in level:
            explored += 1
            groups: dict = {}
            for m in sorted_markings(state):
                for tag, arg, res, new in enabled_actions(net, m):
                    groups.setdefault((tag, arg), {}).setdefault(res, set()).add(new)
            keys = sorted(groups, key=lambda ta: (ta[0], sort_key(ta[1])))
            for tag, arg in keys:
                results = sorted(groups[(tag, arg)], key=sort_key)
                if len(results) > 1:
                    return ResDetCounterexample(tr, tag, arg, results[0], results[1])
            for tag, arg in keys:
                for res in sorted(groups[(tag, arg)], key=sort_key):
                    after, trunc = silent_closure(net, groups[(tag, arg)][res], bound)
                    if trunc:
                        raise ClosureTruncated(f"silent closure exceeded {bound} steps")
                    if after not in seen:
                        seen.add(after)
                        nxt.append((tr + ((tag, arg, res),), after))
        nxt.sort(key=lambda x: _trace_key(x[0]))
        level = nxt
    return ResDetOk(explored)


def token_delta(rule: Rule) -> int:
    return len(rule.post) - len(rule.pre)


__all__ = [
    "Place", "Net", "Rule", "NetError", "ClosureTruncated", "NotEnumerable",
    "parse_net", "load_net", "silent_closure", "io_successors", "fire_io",
    "horizon_open", "traces_upto", "check_result_det", "marking", "marking_union",
    "show_marking", "show_place", "show_action", "enabled_actions", "is_prefix_closed",
    "ResDetOk", "ResDetCounterexample", "sorted_markings",
]
