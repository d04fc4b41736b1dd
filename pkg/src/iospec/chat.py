"""The chat server of the channel example, instantiated for given message
scripts: program and net generation, the outgoing-order property, and a
driver that explores every schedule.

Two members, nicknamed "n1" and "n2", send the scripted messages; the
server relays each one, quoted as `n says 'm'`, to both members. The
channel is a CAS-based queue whose receiver carries a constrained prophecy
variable predicting an interleaving of the two senders' messages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from iospec import prophecy
from iospec.explorer import DEFAULT_BUDGET, Property, Report, explore
from iospec.parser import parse_program
from iospec.petri import parse_net
from iospec.syntax import Char, list_items, make_string, show_value

MEMBERS = ("n1", "n2")


def quote(nick: str, msg: str) -> str:
    return f"{nick} says '{msg}'"


def _lit(s: str) -> str:
    return show_value(make_string(s))


def _list(items) -> str:
    return "[" + ", ".join(_lit(s) for s in items) + "]"


def interleavings(a: tuple, b: tuple) -> list[tuple]:
    """All order-preserving merges of `a` and `b`, in canonical order."""
    out = []
    for pos in itertools.combinations(range(len(a) + len(b)), len(a)):
        ia, ib = iter(a), iter(b)
        chosen = set(pos)
        out.append(tuple(next(ia) if k in chosen else next(ib) for k in range(len(a) + len(b))))
    return sorted(out)


def quoted(scripts: dict[str, list[str]]) -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(quote(n, m) for m in scripts.get(n, ())) for n in MEMBERS)


def channel_constraint(scripts: dict[str, list[str]]) -> str:
    q1, q2 = quoted(scripts)
    return f"interleave(lit{{{_list(q1)}}}, lit{{{_list(q2)}}})"


def chat_program(scripts: dict[str, list[str]], channel: str = "queue",
                 constrained: bool = True) -> str:
    """Surface program for the chat server over the given scripts.

    `channel="stack"` is the reordering mutant; `constrained=False` uses an
    unconstrained incremental prophecy variable instead.
    """
    constraint = channel_constraint(scripts) if constrained else "any"
    if channel == "queue":
        push = "elems ++ [v]"
    elif channel == "stack":
        push = "v :: elems"
    else:
        raise ValueError(f"unknown channel kind {channel!r}")
    return f"""\
// Chat server with a two-sender, one-receiver channel.
fn newChannel() {{
  let pvar := cpvar({constraint}) in
  let queue := ref [] in
  {{pvar := pvar; queue := queue}}
}}
fn send(c, v) {{
  let elems := <!c.queue> in
  if not cas(c.queue, elems, {push}) then send(c, v)
}}
fn receive(c) {{
  let elems := <!c.queue> in
  match elems with
  | [] => receive(c)
  | v :: vs =>
      if cas(c.queue, elems, vs) then {{ assign_pvar(c.pvar, v); v }}
      else receive(c)
}}
fn pumpFromNick(n, roomChan) {{
  loop {{
    let m := receiveFromNick(n) in
    send(roomChan, n ++ " says '" ++ m ++ "'")
  }}
}}
fn pumpRoom(roomChan) {{
  loop {{
    let m := receive(roomChan) in
    sendToNick("n1", m); sendToNick("n2", m)
  }}
}}
let roomChan := newChannel() in
fork pumpFromNick("n1", roomChan);
fork pumpFromNick("n2", roomChan);
pumpRoom(roomChan)
"""


def chat_net(scripts: dict[str, list[str]], permissive: bool = False) -> str:
    """The chat specification: each member's incoming script, and one
    silent choice per interleaving of the quoted messages, after which the
    same sequence goes to both members.

    `permissive` accepts any outgoing messages (used to let the order
    property, rather than the net, judge a mutant)."""
    q1, q2 = quoted(scripts)
    init = " + ".join(f"r({_lit(n)}, {_list(scripts.get(n, ()))})" for n in MEMBERS)
    lines = [
        "// Chat room with two members; generated from the message scripts.",
        "tags receiveFromNick, sendToNick;",
        f"init {init} + s;",
        "io receiveFromNick(r(N, M :: Ms), N, M, r(N, Ms));",
        "open receiveFromNick(r(N, []), N);",
    ]
    if permissive:
        lines.append("io sendToNick(s, P, unit, s);")
    else:
        for mu in interleavings(q1, q2):
            lines.append(f"noop(s, sp({_list(mu)}));")
        lines += [
            'split(sp(Mu), snd("n1", Mu), snd("n2", Mu));',
            "io sendToNick(snd(N, M :: Ms), (N, M), unit, snd(N, Ms));",
        ]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ChatOrder(Property):
    """Both members receive prefixes of one common sequence, and that
    sequence is a prefix of an interleaving of the quoted inputs."""

    constraint: prophecy.Constraint
    name = "chat-order"

    def initial(self):
        return tuple(() for _ in MEMBERS)

    def step(self, state, label):
        tag, arg, _ = label
        if tag != "sendToNick":
            return state
        nick = "".join(c.c for c in list_items(arg.a) or () if isinstance(c, Char))
        msg = arg.b
        if nick not in MEMBERS:
            return f"sendToNick to unknown member {show_value(arg.a)}"
        k = MEMBERS.index(nick)
        state = state[:k] + (state[k] + (msg,),) + state[k + 1:]
        a, b = sorted(state, key=len)
        if b[: len(a)] != a:
            return "members received different orders: " + _show_orders(state)
        if not prophecy.accepts_prefix(self.constraint, b):
            return "outgoing order is not an interleaving of the inputs: " + _show_orders(state)
        return state

    def leaf(self, state):
        return state

    def show(self, state) -> str:
        return _show_orders(state)


def _show_orders(state) -> str:
    return "; ".join(
        f"{n}: " + (" . ".join(show_value(m) for m in seq) or "(none)")
        for n, seq in zip(MEMBERS, state)
    )


@dataclass
class ChatResult:
    report: Report
    program: str
    net: str
    expected: int  # messages per complete order

    @property
    def complete_orders(self) -> set[tuple]:
        """Per-branch outgoing orders in which every message was delivered
        to both members."""
        return {s for s in self.report.observations or ()
                if all(len(seq) == self.expected for seq in s)}


def explore_chat(scripts: dict[str, list[str]], depth: int = 64, channel: str = "queue",
                 constrained: bool = True, permissive: bool = False,
                 max_states: int = DEFAULT_BUDGET, workers: int = 1,
                 dedup: bool = True) -> ChatResult:
    """Explore the chat server for the scripts, checking the order property
    on every branch."""
    prog_text = chat_program(scripts, channel, constrained)
    net_text = chat_net(scripts, permissive)
    net = parse_net(net_text, "chat")
    program = parse_program(prog_text, tags=net.tags)
    c = prophecy.parse_constraint(channel_constraint(scripts))
    rep = explore(program, net, depth, dedup=dedup, max_states=max_states,
                  prop=ChatOrder(c), workers=workers)
    return ChatResult(rep, prog_text, net_text, sum(len(q) for q in quoted(scripts)))
