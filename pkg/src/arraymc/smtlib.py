"""SMT-LIB 2.6 rendering of the sentences checked by the engine (diagnostics only)."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from .errors import InternalError
from .logic import (
    And,
    CaseApp,
    Const,
    EConst,
    Eq,
    EVar,
    IConst,
    IVar,
    Lit,
    Lt,
    Not,
    Or,
    Read,
    Rel,
    eliminate_case_functions,
)
from .smt import Engine, ExistsForallSentence
from .theories import BooleanTheory, Enumerated, Rationals

INDEX_SORT = "Index"


def _sym(name: str) -> str:
    plain = name.replace("'", "_p").replace("-", "_")
    return plain if plain and (plain[0].isalpha() or plain[0] == "_") else f"|{name}|"


def _ctor(sort, value: str) -> str:
    return _sym(f"{sort.name}_{value}")


def _rational(v: Fraction) -> str:
    num = f"{abs(v.numerator)}.0" if v.denominator == 1 else f"(/ {abs(v.numerator)}.0 {v.denominator}.0)"
    return f"(- {num})" if v < 0 else num


class _Printer:
    def __init__(self, engine: Engine):
        self.engine = engine

    def sort(self, s) -> str:
        if s.is_index:
            return INDEX_SORT
        th = self.engine.elem.get(s)
        if isinstance(th, BooleanTheory):
            return "Bool"
        if isinstance(th, Rationals):
            return "Real"
        return _sym(s.name)

    def term(self, t) -> str:
        if isinstance(t, (IVar, IConst, EVar)):
            return _sym(t.name)
        if isinstance(t, EConst):
            if isinstance(t.value, Fraction):
                return _rational(t.value)
            th = self.engine.elem.get(t.sort)
            if isinstance(th, BooleanTheory):
                return t.value
            return _ctor(t.sort, t.value)
        if isinstance(t, Read):
            return f"({_sym(t.array)} {self.term(t.index)})"
        if isinstance(t, CaseApp):
            raise InternalError("case-function applications must be eliminated before printing")
        raise InternalError(f"unknown term {t!r}")

    def atom(self, a) -> str:
        if isinstance(a, Eq):
            return f"(= {self.term(a.lhs)} {self.term(a.rhs)})"
        if isinstance(a, Lt):
            return f"(< {self.term(a.lhs)} {self.term(a.rhs)})"
        if isinstance(a, Rel):
            name = "idx_lt" if a.name == "<" else _sym(a.name)
            return f"({name} {' '.join(self.term(t) for t in a.args)})"
        raise InternalError(f"unknown atom {a!r}")

    def formula(self, f) -> str:
        if isinstance(f, Lit):
            s = self.atom(f.atom)
            return s if f.positive else f"(not {s})"
        if isinstance(f, Const):
            return "true" if f.value else "false"
        if isinstance(f, And):
            return "true" if not f.args else f"(and {' '.join(self.formula(g) for g in f.args)})"
        if isinstance(f, Or):
            return "false" if not f.args else f"(or {' '.join(self.formula(g) for g in f.args)})"
        if isinstance(f, Not):
            return f"(not {self.formula(f.arg)})"
        raise InternalError(f"unknown formula {f!r}")

    def binders(self, vars_) -> str:
        return " ".join(f"({_sym(v.name)} {self.sort(v.sort)})" for v in vars_)


def _theory_axioms(engine: Engine) -> list[str]:
    th = engine.index
    lines: list[str] = []
    consts = [_sym(c.name) for c in th.const_terms]
    for c in consts:
        lines.append(f"(declare-const {c} {INDEX_SORT})")
    if len(consts) > 1:
        lines.append(f"(assert (distinct {' '.join(consts)}))")
    if th.kind == "linear-order":
        lines.append(f"(declare-fun idx_lt ({INDEX_SORT} {INDEX_SORT}) Bool)")
        lines.append(f"(assert (forall ((x {INDEX_SORT})) (not (idx_lt x x))))")
        lines.append(f"(assert (forall ((x {INDEX_SORT}) (y {INDEX_SORT}) (z {INDEX_SORT})) "
                     "(=> (and (idx_lt x y) (idx_lt y z)) (idx_lt x z))))")
        lines.append(f"(assert (forall ((x {INDEX_SORT}) (y {INDEX_SORT})) "
                     "(or (= x y) (idx_lt x y) (idx_lt y x))))")
    elif th.kind == "successor":
        # functional and injective, without cycles of length up to three;
        # full acyclicity is not first-order expressible
        lines.append(f"(declare-fun S ({INDEX_SORT} {INDEX_SORT}) Bool)")
        lines.append(f"(assert (forall ((x {INDEX_SORT})) (not (S x x))))")
        lines.append(f"(assert (forall ((x {INDEX_SORT}) (y {INDEX_SORT})) (not (and (S x y) (S y x)))))")
        lines.append(f"(assert (forall ((x {INDEX_SORT}) (y {INDEX_SORT}) (z {INDEX_SORT})) "
                     "(not (and (S x y) (S y z) (S z x)))))")
        lines.append(f"(assert (forall ((x {INDEX_SORT}) (y {INDEX_SORT}) (z {INDEX_SORT})) "
                     "(=> (and (S x y) (S x z)) (= y z))))")
        lines.append(f"(assert (forall ((x {INDEX_SORT}) (y {INDEX_SORT}) (z {INDEX_SORT})) "
                     "(=> (and (S x z) (S y z)) (= x y))))")
        if consts:
            lines.append(f"(assert (forall ((x {INDEX_SORT})) (not (S x {consts[0]}))))")
        if len(consts) > 1:
            lines.append(f"(assert (S {consts[0]} {consts[1]}))")
    return lines


def to_smtlib2(s: ExistsForallSentence, engine: Engine, comment: str = "") -> str:
    """A self-contained SMT-LIB 2.6 script whose satisfiability matches ``s``."""
    p = _Printer(engine)
    enums = {sort: th for sort, th in engine.elem.items()
             if isinstance(th, Enumerated) and not isinstance(th, BooleanTheory)}
    logic = "ALL" if enums else "AUFLIRA"
    lines = [f"; {line}" for line in comment.splitlines()]
    lines.append(f"(set-logic {logic})")
    lines.append(f"(declare-sort {INDEX_SORT} 0)")
    for sort, th in sorted(enums.items(), key=lambda kv: kv[0].name):
        ctors = " ".join(f"({_ctor(sort, v)})" for v in th.values)
        lines.append(f"(declare-datatype {_sym(sort.name)} ({ctors}))")
    lines.extend(_theory_axioms(engine))
    for name, sort in sorted(engine.arrays.items()):
        lines.append(f"(declare-fun {_sym(name)} ({INDEX_SORT}) {p.sort(sort)})")
    parts = [p.formula(eliminate_case_functions(s.body))]
    for block in s.blocks:
        matrix = p.formula(eliminate_case_functions(block.matrix))
        parts.append(f"(forall ({p.binders(block.vars)}) {matrix})" if block.vars else matrix)
    body = parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"
    vars_ = tuple(s.index_vars) + tuple(s.elem_vars)
    if vars_:
        body = f"(exists ({p.binders(vars_)}) {body})"
    lines.append(f"(assert {body})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def dump_smtlib2(s: ExistsForallSentence, path: str | Path, engine: Engine, comment: str = "") -> Path:
    path = Path(path)
    path.write_text(to_smtlib2(s, engine, comment))
    return path


class DumpWriter:
    """Engine hook writing one numbered file per top-level check into a directory."""

    def __init__(self, directory: str | Path, engine: Engine):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.engine = engine
        self.count = 0

    def __call__(self, kind: str, sentence: ExistsForallSentence) -> None:
        self.count += 1
        dump_smtlib2(sentence, self.directory / f"{self.count:05d}_{kind}.smt2", self.engine, comment=kind)

    def install(self) -> "DumpWriter":
        self.engine.dump_hook = self
        return self
