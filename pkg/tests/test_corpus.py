from __future__ import annotations

import io

import pytest

from iospec.corpus import load_cases, main, run_case

CASES = load_cases()


def test_every_case_has_a_description_and_commands():
    assert len(CASES) >= 20
    for c in CASES:
        assert c.realizes and c.commands
        assert (c.path / "prog.iol").is_file() and (c.path / "spec.net").is_file()


@pytest.mark.parametrize("case", CASES, ids=[c.name for c in CASES])
def test_case_matches_goldens(case):
    for o in run_case(case):
        assert o.exit == o.expected_exit, f"{o.case}/{o.command}"
        assert o.golden is not None, f"{o.case}/{o.command}: missing golden"
        assert o.stdout == o.golden, f"{o.case}/{o.command}"


def test_required_coverage():
    names = {c.name for c in CASES}
    for required in ["hi", "put_some_char", "putchars", "toupper", "cat2", "cat",
                     "buffered_start", "chat", "cas_incr", "pvar_simple"]:
        assert required in names
    toupper = next(c for c in CASES if c.name == "toupper")
    assert sum(cmd.name.startswith("run_") and cmd.exit == 0 for cmd in toupper.commands) == 26


def test_list_and_unknown_case():
    out = io.StringIO()
    assert main([], list_only=True, out=out) == 0
    assert "chat:" in out.getvalue()
    with pytest.raises(KeyError):
        load_cases(["nope"])
