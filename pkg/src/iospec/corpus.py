"""The bundled example corpus and its golden outputs.

Each case lives in `corpus/<case>/` with `prog.iol`, `spec.net`, optional
`*.env` scripts and a `case.json`:

    {"realizes": "...",
     "commands": [{"name": "run", "args": ["run", "prog.iol", "--net", "spec.net"],
                   "exit": 0}]}

Arguments naming files in the case directory are resolved against it. The
standard output of command `name` is compared with `expected.<name>.txt`.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

CORPUS_DIR = Path(__file__).parent / "corpus"


@dataclass
class Command:
    name: str
    args: list[str]
    exit: int


@dataclass
class CorpusCase:
    name: str
    path: Path
    realizes: str
    commands: list[Command] = field(default_factory=list)

    def resolve(self, args: list[str]) -> list[str]:
        return [str(self.path / a) if (self.path / a).is_file() else a for a in args]

    def golden(self, cmd: Command) -> Path:
        return self.path / f"expected.{cmd.name}.txt"


@dataclass
class Outcome:
    case: str
    command: str
    exit: int
    expected_exit: int
    stdout: str
    golden: str | None

    @property
    def passed(self) -> bool:
        return self.exit == self.expected_exit and self.golden is not None and self.stdout == self.golden


def load_case(path: Path) -> CorpusCase:
    meta = json.loads((path / "case.json").read_text(encoding="utf-8"))
    cmds = [Command(c["name"], list(c["args"]), int(c["exit"])) for c in meta["commands"]]
    return CorpusCase(path.name, path, meta["realizes"], cmds)


def load_cases(names: list[str] | None = None) -> list[CorpusCase]:
    cases = [load_case(p) for p in sorted(CORPUS_DIR.iterdir()) if (p / "case.json").is_file()]
    if names:
        unknown = set(names) - {c.name for c in cases}
        if unknown:
            raise KeyError(f"unknown corpus case(s): {', '.join(sorted(unknown))}")
        cases = [c for c in cases if c.name in names]
    return cases


def run_command(case: CorpusCase, cmd: Command) -> tuple[int, str]:
    from iospec.cli import main

    out, err = io.StringIO(), io.StringIO()
    code = main(case.resolve(cmd.args), out, err)
    return code, out.getvalue()


def run_case(case: CorpusCase, update: bool = False) -> list[Outcome]:
    outcomes = []
    for cmd in case.commands:
        code, stdout = run_command(case, cmd)
        golden_path = case.golden(cmd)
        if update and code == cmd.exit:
            golden_path.write_text(stdout, encoding="utf-8")
        golden = golden_path.read_text(encoding="utf-8") if golden_path.is_file() else None
        outcomes.append(Outcome(case.name, cmd.name, code, cmd.exit, stdout, golden))
    return outcomes


def run_corpus(names: list[str] | None = None, update: bool = False) -> list[Outcome]:
    """Execute every case's commands and compare with the goldens."""
    outcomes = []
    for case in load_cases(names):
        outcomes += run_case(case, update)
    return outcomes


def main(names: list[str], update: bool = False, list_only: bool = False, out=None) -> int:
    import sys

    out = out or sys.stdout
    cases = load_cases(names)
    if list_only:
        for c in cases:
            out.write(f"{c.name}: {c.realizes}\n")
        return 0
    failed = 0
    total = 0
    for case in cases:
        for o in run_case(case, update):
            total += 1
            if o.passed:
                out.write(f"PASS {o.case}/{o.command}\n")
                continue
            failed += 1
            why = []
            if o.exit != o.expected_exit:
                why.append(f"exit {o.exit}, expected {o.expected_exit}")
            if o.golden is None:
                why.append("no golden output")
            elif o.stdout != o.golden:
                why.append("output differs from golden")
            out.write(f"FAIL {o.case}/{o.command}: {'; '.join(why)}\n")
    out.write(f"{total - failed}/{total} corpus commands passed\n")
    return 1 if failed else 0
