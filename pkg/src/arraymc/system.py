"""Array-based transition systems: theories, arrays, initial/unsafe formulas."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .logic import (
    Cube,
    EConst,
    ExistsI,
    Formula,
    Sort,
    TransitionRule,
    formula_terms,
    to_primitive_differentiated,
)
from .smt import Engine, SmtStats
from .theories import IndexTheory


@dataclass(frozen=True)
class SystemSpec:
    """A safety problem: index theory, element theories, arrays, I, transitions, U."""

    name: str
    index_theory: IndexTheory
    sorts: tuple  # ((Sort, ElemTheory), ...)
    arrays: tuple  # ((name, Sort), ...)
    init: tuple  # (ForallI, ...), conjoined
    transitions: tuple  # (TransitionRule, ...)
    unsafe: tuple  # (ExistsI, ...), disjoined
    suggested: tuple = ()  # (ExistsI, ...) user-supplied candidate cubes

    @property
    def elem_theories(self) -> dict:
        return dict(self.sorts)

    @property
    def array_sorts(self) -> dict:
        return dict(self.arrays)

    @property
    def constants(self) -> tuple:
        return self.index_theory.const_terms

    def transition(self, name: str) -> TransitionRule:
        for t in self.transitions:
            if t.name == name:
                return t
        raise KeyError(name)

    def engine(self, stats: SmtStats | None = None) -> Engine:
        return Engine(self.index_theory, self.elem_theories, self.array_sorts, stats)

    def normalize(self, f: ExistsI) -> list[Cube]:
        """Primitive differentiated cubes of an existential formula."""
        return to_primitive_differentiated(f, self.constants)

    def unsafe_cubes(self) -> list[Cube]:
        out: list = []
        for u in self.unsafe:
            for c in self.normalize(u):
                if c not in out:
                    out.append(c)
        return out

    def all_formulas(self) -> list[Formula]:
        fs: list = [b.matrix for b in self.init] + [u.matrix for u in self.unsafe] + [s.matrix for s in self.suggested]
        for t in self.transitions:
            fs.append(t.guard)
            for _, fn in t.updates:
                for g, v in fn.branches:
                    fs.append(g)
                    fs.append(_term_formula(v))
                if fn.default is not None:
                    fs.append(_term_formula(fn.default))
        return fs

    def numerals(self, sort: Sort) -> list[Fraction]:
        """Rational constants of ``sort`` mentioned anywhere in the system."""
        found = set()
        for f in self.all_formulas():
            for t in formula_terms(f):
                if isinstance(t, EConst) and t.sort == sort and isinstance(t.value, Fraction):
                    found.add(t.value)
        return sorted(found)


def _term_formula(t) -> Formula:
    """Wrap a term so that formula traversals can see its subterms."""
    from .logic import Lit, make_eq

    return Lit(make_eq(t, t))
