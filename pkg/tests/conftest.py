from __future__ import annotations

import functools
from pathlib import Path

import pytest

from arraymc.parser import format_spec, load_spec, parse_spec

CORPUS = Path(__file__).resolve().parents[1] / "src" / "arraymc" / "corpus"
CORPUS_NAMES = sorted(p.stem for p in CORPUS.glob("*.spec"))


@functools.lru_cache(maxsize=None)
def corpus(name: str):
    return load_spec(CORPUS / f"{name}.spec")


def exists(spec, vars_: str, body: str):
    """Parse ``exists vars_ . body`` in the vocabulary of ``spec``."""
    text = format_spec(spec) + f"\nsuggest_invariant exists {vars_} . {body}\n"
    return parse_spec(text, check=False).suggested[-1]


def cube(spec, vars_: str, body: str):
    cubes = spec.normalize(exists(spec, vars_, body))
    assert len(cubes) == 1, cubes
    return cubes[0]


@pytest.fixture
def mesi():
    return corpus("mesi")


@pytest.fixture
def ins_sort():
    return corpus("ins_sort")


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
