from __future__ import annotations

from pathlib import Path

import pytest

from iospec.corpus import CORPUS_DIR
from iospec.parser import parse_program
from iospec.petri import load_net, parse_net

EMPTY_NET = "tags; init p;"


def corpus_names(with_program: bool = True) -> list[str]:
    out = []
    for p in sorted(CORPUS_DIR.iterdir()):
        if p.name == "bad_scope" or not (p / "spec.net").is_file():
            continue
        out.append(p.name)
    return out


def load(case: str):
    """(program, net) of a corpus case."""
    d = CORPUS_DIR / case
    net = load_net(d / "spec.net")
    return parse_program((d / "prog.iol").read_text(encoding="utf-8"), tags=net.tags), net


def program(text: str, net_text: str = EMPTY_NET):
    net = parse_net(net_text)
    return parse_program(text, tags=net.tags), net


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS_DIR
