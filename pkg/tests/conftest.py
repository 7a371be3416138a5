"""Shared fixtures: tiny programs and corpus access."""

from pathlib import Path

import pytest

from kinduct.frontend import parse, typecheck, override_widths
from kinduct.goto_ir import lower

CORPUS = Path(__file__).resolve().parents[1] / "src" / "kinduct" / "corpus"
NEGATIVE = Path(__file__).resolve().parent / "negative"

FIG1 = """int main() {
  unsigned int x = *;
  while (x > 0) {
    x = x - 1;
  }
  assert(x == 0);
  return 0;
}
"""

COUNT_UP = """int main() {
  unsigned int i = 0;
  while (i < 10) {
    i = i + 1;
  }
  assert(i == 10);
  return 0;
}
"""


def compile_mc(source: str, width: int | None = None):
    """Source text -> lowered GotoProgram, optionally at a forced width."""
    prog = parse(source)
    if width is not None:
        prog = override_widths(prog, width)
    return lower(typecheck(prog))


def corpus_path(name: str) -> Path:
    p = CORPUS / name
    assert p.exists(), f"missing corpus file {name}"
    return p


def corpus_entries():
    entries = []
    for line in (CORPUS / "manifest.tsv").read_text().splitlines():
        path, expected, category = line.split("\t")
        entries.append((CORPUS / path, expected, category))
    return entries


@pytest.fixture
def fig1_goto():
    return compile_mc(FIG1)


@pytest.fixture
def count_up_goto():
    return compile_mc(COUNT_UP)
