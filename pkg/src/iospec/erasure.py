"""Empirical erasure check for prophecy variables.

The intermediate semantics tracks only which prophecy identifiers are live
(and the residual constraints). The instrumented semantics additionally
draws, at creation, a finite prophecy from a value domain; an assignment
that disagrees with the prophecy never completes (modelled as a blocked
step). Both are explored breadth-first to the same depth, and the harness
reports:

* whether instrumented-safe implies intermediate-safe, and
* whether every intermediate-reachable configuration (with in-domain
  assigned values) is instrumented-reachable for every prophecy the
  instrumented run could still hold at that point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from iospec.explorer import (
    Node, Options, Stats, _node_verdict, canonical_key, prophecy_candidates,
    remaining_candidates, root_node, successors, DomainTooLarge,
)
from iospec.interp import Config
from iospec.monitor import Verdict
from iospec.petri import Net
from iospec.syntax import Expr, show_value

MAX_CANDIDATES = 4096


@dataclass
class SemanticsRun:
    name: str
    states: int = 0
    failure: Verdict | None = None
    stats: Stats = field(default_factory=Stats)
    keys: set = field(default_factory=set)
    nodes: list = field(default_factory=list)

    @property
    def safe(self) -> bool:
        return self.failure is None


@dataclass
class ErasureReport:
    intermediate: SemanticsRun
    instrumented: SemanticsRun
    lemma_checked: int = 0
    lemma_missing: list[str] = field(default_factory=list)
    out_of_domain: int = 0

    @property
    def implication_holds(self) -> bool:
        return not self.instrumented.safe or self.intermediate.safe

    @property
    def lemma_holds(self) -> bool:
        return not self.lemma_missing

    @property
    def nomatch_exercised(self) -> bool:
        return self.instrumented.stats.nomatch_blocked > 0

    @property
    def ok(self) -> bool:
        return self.implication_holds and self.lemma_holds

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def text(self) -> str:
        def side(run: SemanticsRun) -> str:
            verdict = "safe" if run.safe else run.failure.describe()
            return f"{run.name}: {verdict}; states {run.states}"

        lines = [
            side(self.intermediate),
            side(self.instrumented),
            f"instrumented-safe implies intermediate-safe: {'yes' if self.implication_holds else 'NO'}",
            f"reachability correspondence: {'yes' if self.lemma_holds else 'NO'} "
            f"({self.lemma_checked} configurations checked, {self.out_of_domain} outside the domain)",
            f"prophecy mismatch exercised: {'yes' if self.nomatch_exercised else 'no'}",
            f"constraint blocked: {self.intermediate.stats.constraint_blocked}",
        ]
        lines += [f"  missing: {m}" for m in self.lemma_missing[:5]]
        lines.append(f"result: {'Ok' if self.ok else 'Mismatch'}")
        return "\n".join(lines) + "\n"


def _bfs(name: str, program: Expr, net: Net, depth: int, opts: Options, keep_nodes: bool) -> SemanticsRun:
    run = SemanticsRun(name, stats=Stats())
    root = root_node(program, net, opts)
    level = [root]
    run.keys.add(canonical_key(root.cfg, root.spec))
    for d in range(depth + 1):
        nxt: list[Node] = []
        for node in level:
            run.states += 1
            if keep_nodes:
                run.nodes.append(node)
            v = _node_verdict(node, opts, run.stats)
            if v is not None:
                if run.failure is None:
                    run.failure = v
                continue
            if d == depth or node.cfg.finished:
                continue
            for _, child in successors(node, opts, run.stats):
                if isinstance(child, Verdict):
                    if run.failure is None:
                        run.failure = child
                    continue
                key = canonical_key(child.cfg, child.spec)
                if key not in run.keys:
                    run.keys.add(key)
                    nxt.append(child)
        level = nxt
    return run


def erasure_check(program: Expr, net: Net, domain: tuple[Expr, ...], prefix: int = 1,
                  depth: int = 32, closure_bound: int = 64) -> ErasureReport:
    """Compare the intermediate and instrumented semantics of `program`."""
    if len(domain) ** prefix > MAX_CANDIDATES:
        raise DomainTooLarge(f"{len(domain)} values with prefix {prefix} exceed {MAX_CANDIDATES} prophecies")

    def draw(constraint):
        return prophecy_candidates(constraint, domain, prefix)

    inter = _bfs("intermediate", program, net, depth, Options(depth, closure_bound=closure_bound), True)
    instr = _bfs("instrumented", program, net, depth,
                 Options(depth, closure_bound=closure_bound, prophecies=draw), False)
    rep = ErasureReport(inter, instr)
    domain_set = set(domain)
    for node in inter.nodes:
        pvars = node.cfg.pvars
        if any(v not in domain_set for e in pvars for v in e.history):
            rep.out_of_domain += 1
            continue
        options = [remaining_candidates(e, domain, prefix) for e in pvars]
        for combo in itertools.product(*options):
            rep.lemma_checked += 1
            instrumented = tuple(replace(e, prophecy=r) for e, r in zip(pvars, combo))
            cfg = Config(node.cfg.threads, node.cfg.heap, instrumented)
            if canonical_key(cfg, node.spec) not in instr.keys:
                shown = ", ".join("[" + ", ".join(show_value(v) for v in r) + "]" for r in combo)
                rep.lemma_missing.append(f"after {len(node.trace)} actions with prophecies ({shown})")
    return rep


def parse_domain(text: str) -> tuple[Expr, ...]:
    """Comma-separated literals, e.g. `true, false` or `'a', 'b'`."""
    from iospec.lexer import TokenStream, parse_literal

    ts = TokenStream(text)
    out = []
    while not ts.at_kind("eof"):
        out.append(parse_literal(ts))
        if not ts.accept(","):
            break
    if not ts.at_kind("eof"):
        ts.error(f"unexpected {ts.describe()} in value domain")
    return tuple(out)
