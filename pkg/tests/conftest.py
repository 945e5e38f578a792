from __future__ import annotations

import json
from pathlib import Path

import pytest

from llmlint.binding import build_env
from llmlint.patterns import DEFAULT_PATTERNS
from llmlint.syntax import iter_call_sites, parse_source

FIXTURES = Path(__file__).parent / "fixtures"


def load_golden() -> dict[str, list[tuple[int, str]]]:
    data = json.loads((FIXTURES / "golden.json").read_text(encoding="utf-8"))
    return {k: sorted((line, smell) for line, smell in v) for k, v in data.items() if not k.startswith("_")}


def parsed(src: str, path: str = "t.py", patterns=DEFAULT_PATTERNS):
    tree = parse_source(src, path)
    return tree, build_env(tree, patterns)


def call_at(src: str, line: int, path: str = "t.py", patterns=DEFAULT_PATTERNS):
    """The outermost call starting on ``line`` together with its tree and env."""
    tree, env = parsed(src, path, patterns)
    calls = [c for c in iter_call_sites(tree) if c.line == line]
    assert calls, f"no call on line {line}"
    return calls[0], env


@pytest.fixture
def golden():
    return load_golden()
