"""Command-line front end: `iospec run | explore | check-net | erasure | chat | corpus`.

Exit codes
    run        0 Ok, 1 ProgramViolation, 2 EnvironmentViolation, 3 Failure,
               4 parse/spec error, 5 FuelExhausted
    explore    0 SafeUpToDepth, 1 Counterexample, 4 spec error, 6 budget exceeded
    check-net  0 result-deterministic, 1 counterexample, 4 spec error
    erasure    0 both checks hold, 1 a check fails, 4 spec error
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from iospec import __version__
from iospec.lexer import IOLSyntaxError
from iospec.petri import (
    ClosureTruncated, NotEnumerable, ResDetOk, check_result_det, load_net, show_action,
    show_marking,
)

EXIT_SPEC_ERROR = 4
EXIT_BUDGET = 6


@dataclass
class RunConfig:
    program: str | None = None
    net: str | None = None
    env: str | None = None
    schedule: str = "round-robin"
    seed: int = 0
    fuel: int = 100_000
    closure_bound: int = 64
    depth: int = 64
    max_states: int = 1_000_000


class SpecError(Exception):
    """Any input problem reported with exit code 4."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"{Path(path).name}: {exc.strerror}") from None


def _load(cfg: RunConfig):
    from iospec.parser import parse_program

    try:
        net = load_net(cfg.net)
    except IOLSyntaxError as exc:
        raise SpecError(f"{Path(cfg.net).name}:{exc.line}:{exc.col}: {exc.message}") from None
    except OSError as exc:
        raise SpecError(f"{Path(cfg.net).name}: {exc.strerror}") from None
    text = _read(cfg.program)
    try:
        program = parse_program(text, tags=net.tags)
    except IOLSyntaxError as exc:
        raise SpecError(f"{Path(cfg.program).name}:{exc.line}:{exc.col}: {exc.message}") from None
    return program, net


def _emit(out, text: str) -> None:
    out.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_run(cfg: RunConfig, out=sys.stdout, err=sys.stderr, as_json: bool = False, stdin=None) -> int:
    from iospec.explorer import verdict_dict
    from iospec.monitor import ScriptEnv, StreamEnv, make_schedule, monitored_run, parse_env

    program, net = _load(cfg)
    if cfg.env == "-":
        env = StreamEnv(stdin or sys.stdin)
    elif cfg.env:
        try:
            env = ScriptEnv(parse_env(_read(cfg.env)))
        except IOLSyntaxError as exc:
            raise SpecError(f"{Path(cfg.env).name}:{exc.line}:{exc.col}: {exc.message}") from None
    else:
        env = ScriptEnv()
    res = monitored_run(program, net, env, make_schedule(cfg.schedule, cfg.seed),
                        fuel=cfg.fuel, bound=cfg.closure_bound)
    for w in res.warnings:
        err.write(f"warning: {w}\n")
    if as_json:
        doc = {
            "schema": "iospec.run/1",
            "trace": [show_action(a) for a in res.trace],
            "verdict": verdict_dict(res.verdict),
            "final_markings": [show_marking(m) for m in res.spec.sorted()],
            "steps": res.steps,
        }
        _emit(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        for a in res.trace:
            _emit(out, show_action(a) + "\n")
        _emit(out, "verdict: " + res.verdict.describe() + "\n")
    return res.exit_code


def cmd_explore(cfg: RunConfig, out=sys.stdout, dedup: bool = True, workers: int = 1,
                as_json: bool = False, replay: bool = False) -> int:
    from iospec.explorer import StateBudgetExceeded, explore, replay as do_replay, report_json, report_text

    program, net = _load(cfg)
    try:
        rep = explore(program, net, cfg.depth, dedup=dedup, closure_bound=cfg.closure_bound,
                      max_states=cfg.max_states, workers=workers)
    except StateBudgetExceeded as exc:
        _emit(out, f"result: BudgetExceeded\nstates: {exc.states}\n")
        return EXIT_BUDGET
    except ClosureTruncated as exc:
        raise SpecError(str(exc)) from None
    _emit(out, report_json(rep) if as_json else report_text(rep))
    if replay and rep.counterexample is not None:
        res = do_replay(program, net, rep.counterexample, cfg.closure_bound)
        _emit(out, "replay: " + res.verdict.describe() + "\n")
    return rep.exit_code


def cmd_check_net(path: str, k: int = 4, bound: int = 64, out=sys.stdout) -> int:
    try:
        net = load_net(path)
    except IOLSyntaxError as exc:
        raise SpecError(f"{Path(path).name}:{exc.line}:{exc.col}: {exc.message}") from None
    except OSError as exc:
        raise SpecError(f"{Path(path).name}: {exc.strerror}") from None
    try:
        res = check_result_det(net, net.init, k, bound)
    except (ClosureTruncated, NotEnumerable) as exc:
        raise SpecError(str(exc)) from None
    _emit(out, f"rules: {len(net.rules)}\n")
    if isinstance(res, ResDetOk):
        _emit(out, f"result-deterministic up to {k} actions ({res.explored} states)\n")
        return 0
    _emit(out, f"not result-deterministic: {res}\n")
    return 1


def cmd_erasure(cfg: RunConfig, domain: str, prefix: int, out=sys.stdout) -> int:
    from iospec.erasure import DomainTooLarge, erasure_check, parse_domain

    program, net = _load(cfg)
    try:
        values = parse_domain(domain)
    except IOLSyntaxError as exc:
        raise SpecError(f"--domain:{exc.col}: {exc.message}") from None
    try:
        rep = erasure_check(program, net, values, prefix, cfg.depth, cfg.closure_bound)
    except DomainTooLarge as exc:
        raise SpecError(str(exc)) from None
    _emit(out, rep.text())
    return rep.exit_code


def cmd_chat(n1: list[str], n2: list[str], depth: int, channel: str, constrained: bool,
             permissive: bool, workers: int = 1, out=sys.stdout, as_json: bool = False,
             show_program: bool = False) -> int:
    from iospec.chat import explore_chat
    from iospec.explorer import report_dict, report_text

    res = explore_chat({"n1": n1, "n2": n2}, depth, channel, constrained, permissive, workers=workers)
    if show_program:
        _emit(out, res.program + "\n" + res.net + "\n")
    if as_json:
        d = report_dict(res.report)
        d["complete_orders"] = sorted(res.report.prop.show(o) for o in res.complete_orders)
        _emit(out, json.dumps(d, indent=2, sort_keys=True) + "\n")
    else:
        _emit(out, report_text(res.report))
    return res.report.exit_code


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, program: bool = True) -> None:
    if program:
        p.add_argument("program", help="program file (.iol)")
        p.add_argument("--net", required=True, help="specification net (.net)")
    p.add_argument("--closure-bound", type=int, default=64, help="silent-closure depth (default 64)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iospec", description="Run, monitor and explore programs against Petri-net I/O specifications.")
    ap.add_argument("--version", action="version", version=f"iospec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="monitored run of a program against a net")
    _common(p)
    p.add_argument("--env", help="environment script (`tag literal` per line); `-` reads results from stdin")
    p.add_argument("--schedule", choices=["round-robin", "random"], default="round-robin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fuel", type=int, default=100_000)
    p.add_argument("--trace-json", action="store_true", help="emit a JSON document instead of text")

    p = sub.add_parser("explore", help="bounded exploration of all schedules and allowed results")
    _common(p)
    p.add_argument("--depth", type=int, default=64)
    p.add_argument("--max-states", type=int, default=1_000_000)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--workers", type=int, default=1, help="explore root branches in parallel")
    p.add_argument("--replay", action="store_true", help="replay a counterexample under the monitor")
    p.add_argument("--trace-json", action="store_true")

    p = sub.add_parser("check-net", help="load a net and check result-determinism")
    p.add_argument("net")
    p.add_argument("--resdet", type=int, default=4, metavar="K", help="trace-length bound (default 4)")
    p.add_argument("--closure-bound", type=int, default=64)

    p = sub.add_parser("erasure", help="compare intermediate and instrumented prophecy semantics")
    _common(p)
    p.add_argument("--domain", required=True, help="comma-separated prophecy values, e.g. 'true, false'")
    p.add_argument("--prefix", type=int, default=1)
    p.add_argument("--depth", type=int, default=32)

    p = sub.add_parser("chat", help="explore the chat server for given message scripts")
    p.add_argument("--n1", action="append", default=[], metavar="MSG", help="message from n1 (repeatable)")
    p.add_argument("--n2", action="append", default=[], metavar="MSG", help="message from n2 (repeatable)")
    p.add_argument("--depth", type=int, default=64)
    p.add_argument("--channel", choices=["queue", "stack"], default="queue")
    p.add_argument("--unconstrained", action="store_true", help="prophecy variable without a constraint")
    p.add_argument("--permissive", action="store_true", help="net accepts any outgoing messages")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--show-program", action="store_true")
    p.add_argument("--trace-json", action="store_true")

    p = sub.add_parser("corpus", help="run the bundled example corpus against its golden outputs")
    p.add_argument("cases", nargs="*", help="case names (default: all)")
    p.add_argument("--update", action="store_true", help="rewrite golden outputs")
    p.add_argument("--list", action="store_true", help="list the cases")
    return ap


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        program=getattr(args, "program", None), net=getattr(args, "net", None),
        env=getattr(args, "env", None), schedule=getattr(args, "schedule", "round-robin"),
        seed=getattr(args, "seed", 0), fuel=getattr(args, "fuel", 100_000),
        closure_bound=args.closure_bound if hasattr(args, "closure_bound") else 64,
        depth=getattr(args, "depth", 64), max_states=getattr(args, "max_states", 1_000_000),
    )
    try:
        if args.command == "run":
            return cmd_run(cfg, out, err, args.trace_json)
        if args.command == "explore":
            return cmd_explore(cfg, out, not args.no_dedup, args.workers, args.trace_json, args.replay)
        if args.command == "check-net":
            return cmd_check_net(args.net, args.resdet, args.closure_bound, out)
        if args.command == "erasure":
            return cmd_erasure(cfg, args.domain, args.prefix, out)
        if args.command == "chat":
            return cmd_chat(args.n1, args.n2, args.depth, args.channel, not args.unconstrained,
                            args.permissive, args.workers, out, args.trace_json, args.show_program)
        if args.command == "corpus":
            from iospec.corpus import main as corpus_main
            try:
                return corpus_main(args.cases, args.update, args.list, out)
            except KeyError as exc:
                raise SpecError(exc.args[0]) from None
    except SpecError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_SPEC_ERROR
    return 2  # unreachable: argparse requires a command


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
