"""Reader and printer for the ``.spec`` system description format.

A file is a sequence of statements, each introduced by a keyword::

    system mesi
    index-theory equality            # or linear-order, or successor [origin c [c']]
    elem state = enum {1, 2, 3, 4}   # or rational, or bool
    array a : state
    init forall i . a[i] = 4
    transition t1 exists i
      guard a[i] = 4
      update a[j] case j = i -> 2 ; else -> 4
    unsafe exists i1 i2 . a[i1] = 1 and (a[i2] = 1 or a[i2] = 3)
    suggest_invariant exists i . a[i] = 1

Formulas use ``and``, ``or``, ``not``, ``=>``, ``<=>``, parentheses, the
comparisons ``= != < <= > >=`` and index relations written ``S(i, j)``.
``update a[j] := t`` is shorthand for a case function with only a default.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import FunctionalFormError, PartitionError, SpecError
from .logic import (
    FALSE,
    INDEX,
    TRUE,
    CaseFunction,
    EConst,
    ExistsI,
    ForallI,
    Formula,
    IConst,
    IVar,
    Read,
    Sort,
    TransitionRule,
    conj,
    disj,
    eq,
    iff,
    implies,
    le,
    lt,
    neg,
    neq,
    rel,
)
from .smt import ExistsForallSentence
from .system import SystemSpec
from .theories import BooleanTheory, Enumerated, IndexTheory, Rationals

STATEMENTS = ("system", "index-theory", "elem", "array", "init", "transition", "unsafe", "suggest_invariant")
RESERVED = set(STATEMENTS) | {"guard", "update", "case", "else", "exists", "forall", "and", "or", "not", "origin"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*(?:-[A-Za-z_][A-Za-z0-9_']*)*)
  | (?P<op><=>|=>|->|:=|!=|<=|>=|[=<>()\[\]{},;.:!&|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # "id" | "num" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SpecError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind in ("id", "num", "op"):
            out.append(Token(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


# raw (unresolved) terms: ("id", token) or ("read", array token, index raw)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.k = 0
        self.name = "system"
        self.index_theory: IndexTheory | None = None
        self.sorts: dict[str, tuple[Sort, object]] = {}
        self.arrays: dict[str, Sort] = {}
        self.init: list = []
        self.transitions: list = []
        self.unsafe: list = []
        self.suggested: list = []
        self.scope: set = set()
        self.in_transition = False

    # -- token helpers ----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.k]

    def error(self, msg: str, tok: Token | None = None, cls=SpecError):
        tok = tok or self.tok
        return cls(msg, tok.line, tok.col)

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("id", "op") and self.tok.text in texts

    def next(self) -> Token:
        t = self.tok
        self.k += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "id" or self.tok.text in RESERVED:
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def name_token(self, what: str) -> Token:
        if self.tok.kind not in ("id", "num") or self.tok.text in RESERVED:
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def var_list(self) -> list[Token]:
        out = []
        while self.tok.kind == "id" and self.tok.text not in RESERVED:
            out.append(self.next())
        return out

    # -- statements -------------------------------------------------------

    def parse(self) -> SystemSpec:
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind != "id" or t.text not in STATEMENTS:
                raise self.error(f"expected a statement keyword, found {t.text!r}")
            getattr(self, "stmt_" + t.text.replace("-", "_"))()
        if self.index_theory is None:
            raise SpecError("missing index-theory declaration")
        if not self.unsafe:
            raise SpecError("missing unsafe formula")
        spec = SystemSpec(
            name=self.name,
            index_theory=self.index_theory,
            sorts=tuple((s, th) for s, th in self.sorts.values()),
            arrays=tuple(self.arrays.items()),
            init=tuple(self.init),
            transitions=tuple(self.transitions),
            unsafe=tuple(self.unsafe),
            suggested=tuple(self.suggested),
        )
        return spec

    def stmt_system(self):
        self.next()
        self.name = self.name_token("system name").text

    def stmt_index_theory(self):
        kw = self.next()
        if self.index_theory is not None:
            raise self.error("duplicate index-theory declaration", kw)
        kind = self.ident("index theory name")
        consts: list = []
        if self.at("origin"):
            self.next()
            consts.append(self.name_token("constant name").text)
            if self.tok.kind in ("id", "num") and self.tok.text not in RESERVED:
                consts.append(self.next().text)
        try:
            self.index_theory = IndexTheory(kind.text, tuple(consts))
        except SpecError as e:
            raise self.error(e.message, kind) from None

    def stmt_elem(self):
        self.next()
        name = self.ident("sort name")
        if name.text in self.sorts:
            raise self.error(f"duplicate sort {name.text}", name)
        self.expect("=")
        sort = Sort(name.text)
        if self.at("enum"):
            self.next()
            self.expect("{")
            values: list = []
            while True:
                v = self.name_token("enumerated value")
                if v.text in values:
                    raise self.error(f"duplicate value {v.text}", v)
                values.append(v.text)
                if self.at(","):
                    self.next()
                    continue
                self.expect("}")
                break
            th = Enumerated(sort, values)
        elif self.at("rational"):
            self.next()
            th = Rationals(sort)
        elif self.at("bool"):
            self.next()
            th = BooleanTheory(sort)
        else:
            raise self.error("expected enum {...}, rational or bool")
        self.sorts[name.text] = (sort, th)

    def stmt_array(self):
        self.next()
        name = self.ident("array name")
        if name.text in self.arrays:
            raise self.error(f"duplicate array {name.text}", name)
        self.expect(":")
        s = self.ident("element sort")
        if s.text not in self.sorts:
            raise self.error(f"unknown sort {s.text}", s)
        self.arrays[name.text] = self.sorts[s.text][0]

    def _quantified(self, quant: str):
        vars_: list = []
        if self.at(quant):
            self.next()
            toks = self.var_list()
            if not toks:
                raise self.error("expected index variables")
            names = [t.text for t in toks]
            if len(set(names)) != len(names):
                raise self.error("repeated bound variable", toks[0])
            self.expect(".")
            vars_ = [IVar(n) for n in names]
        self.scope = set(v.name for v in vars_)
        f = self.formula()
        self.scope = set()
        return tuple(vars_), f

    def stmt_init(self):
        self.next()
        vars_, f = self._quantified("forall")
        self.init.append(ForallI(vars_, f))

    def stmt_unsafe(self):
        self.next()
        vars_, f = self._quantified("exists")
        self.unsafe.append(ExistsI(vars_, f))

    def stmt_suggest_invariant(self):
        self.next()
        vars_, f = self._quantified("exists")
        self.suggested.append(ExistsI(vars_, f))

    def stmt_transition(self):
        self.next()
        name = self.name_token("transition name")
        if any(t.name == name.text for t in self.transitions):
            raise self.error(f"duplicate transition {name.text}", name)
        params: list = []
        if self.at("exists"):
            self.next()
            params = [t.text for t in self.var_list()]
            if len(set(params)) != len(params):
                raise self.error("repeated transition parameter")
        self.in_transition = True
        self.scope = set(params)
        guard: Formula = TRUE
        if self.at("guard"):
            self.next()
            guard = self.formula()
        updates: dict = {}
        while self.at("update"):
            self.next()
            arr = self.ident("array name")
            if arr.text not in self.arrays:
                raise self.error(f"unknown array {arr.text}", arr)
            if arr.text in updates:
                raise self.error(f"array {arr.text} updated twice", arr, FunctionalFormError)
            self.expect("[")
            j = self.ident("index variable")
            if self.at(","):
                raise self.error("an update binds exactly one universal index variable", cls=FunctionalFormError)
            self.expect("]")
            if j.text in params:
                raise self.error(f"update variable {j.text} clashes with a transition parameter", j,
                                 FunctionalFormError)
            updates[arr.text] = self.case_function(name.text, arr.text, IVar(j.text))
        self.in_transition = False
        self.scope = set()
        if not self.at(*STATEMENTS) and self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} in transition {name.text}")
        self.transitions.append(TransitionRule(name.text, tuple(IVar(p) for p in params), guard,
                                               tuple(updates.items())))

    def case_function(self, tname: str, array: str, j: IVar) -> CaseFunction:
        sort = self.arrays[array]
        outer = self.scope
        self.scope = outer | {j.name}
        branches: list = []
        default = None
        if self.at(":="):
            self.next()
            default = self.elem_term(self.term(), sort)
        else:
            self.expect("case")
            while True:
                if self.at("else"):
                    self.next()
                    self.expect("->")
                    default = self.elem_term(self.term(), sort)
                    break
                g = self.formula()
                self.expect("->")
                branches.append((g, self.elem_term(self.term(), sort)))
                if self.at(";"):
                    self.next()
                    continue
                break
        self.scope = outer
        return CaseFunction(f"{tname}.{array}", j, tuple(branches), default, sort)

    # -- formulas -----------------------------------------------------------

    def formula(self) -> Formula:
        lhs = self.disjunction()
        if self.at("=>"):
            self.next()
            return implies(lhs, self.formula())
        if self.at("<=>"):
            self.next()
            return iff(lhs, self.formula())
        return lhs

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.at("or", "|"):
            self.next()
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else disj(*parts)

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.at("and", "&"):
            self.next()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else conj(*parts)

    def unary(self) -> Formula:
        if self.at("not", "!"):
            self.next()
            return neg(self.unary())
        if self.at("("):
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if self.tok.kind == "id" and self.tok.text in ("true", "false") and not self._comparison_follows():
            return TRUE if self.next().text == "true" else FALSE
        if self.index_theory is not None and self.tok.kind == "id" and self.tok.text in self.index_theory.relations \
                and self.toks[self.k + 1].text == "(":
            return self.relation()
        return self.atom()

    def _comparison_follows(self) -> bool:
        return self.toks[self.k + 1].text in ("=", "!=", "<", "<=", ">", ">=")

    def relation(self) -> Formula:
        name = self.next()
        self.expect("(")
        args = [self.index_term(self.term())]
        while self.at(","):
            self.next()
            args.append(self.index_term(self.term()))
        self.expect(")")
        if len(args) != self.index_theory.relations[name.text]:
            raise self.error(f"relation {name.text} takes {self.index_theory.relations[name.text]} arguments", name)
        return rel(name.text, *args)

    def atom(self) -> Formula:
        start = self.tok
        lhs = self.term()
        if not self.at("=", "!=", "<", "<=", ">", ">="):
            raise self.error(f"expected a comparison after {start.text!r}")
        op = self.next()
        rhs = self.term()
        sl, sr = self.sort_of(lhs), self.sort_of(rhs)
        sort = sl or sr
        if sort is None:
            raise self.error("cannot infer the sort of this comparison", start)
        if sl is not None and sr is not None and sl != sr:
            raise self.error(f"sort mismatch: {sl} vs {sr}", op)
        if sort.is_index:
            a, b = self.index_term(lhs), self.index_term(rhs)
            if op.text in ("<", "<=", ">", ">=") and self.index_theory.kind != "linear-order":
                raise self.error(f"index theory {self.index_theory.kind} has no order", op)
        else:
            a, b = self.elem_term(lhs, sort), self.elem_term(rhs, sort)
            if op.text in ("<", "<=", ">", ">=") and not isinstance(self.theory(sort), Rationals):
                raise self.error(f"sort {sort} is not ordered", op)
        return {
            "=": lambda: eq(a, b),
            "!=": lambda: neq(a, b),
            "<": lambda: lt(a, b),
            ">": lambda: lt(b, a),
            "<=": lambda: le(a, b),
            ">=": lambda: le(b, a),
        }[op.text]()

    def term(self):
        t = self.name_token("term")
        if self.at("["):
            self.next()
            idx = self.term()
            if self.at(","):
                raise self.error("array reads take one index", cls=FunctionalFormError)
            self.expect("]")
            if t.kind != "id" or t.text not in self.arrays:
                raise self.error(f"unknown array {t.text}", t)
            if idx[0] != "id":
                raise self.error("array index must be an index variable or constant", t)
            return ("read", t, idx)
        return ("id", t)

    # -- sort resolution ----------------------------------------------------

    def theory(self, sort: Sort):
        for s, th in self.sorts.values():
            if s == sort:
                return th
        raise SpecError(f"unknown sort {sort}")

    def sort_of(self, raw) -> Sort | None:
        if raw[0] == "read":
            return self.arrays[raw[1].text]
        text = raw[1].text
        if text in self.scope or text in self.index_theory.constants:
            return INDEX
        return None

    def index_term(self, raw):
        if raw[0] != "id":
            raise self.error("expected an index term", raw[1])
        tok = raw[1]
        if tok.text in self.scope:
            return IVar(tok.text)
        if tok.text in self.index_theory.constants:
            return IConst(tok.text)
        cls = FunctionalFormError if self.in_transition else SpecError
        raise self.error(f"unbound index variable {tok.text}", tok, cls)

    def elem_term(self, raw, sort: Sort):
        if raw[0] == "read":
            s = self.arrays[raw[1].text]
            if s != sort:
                raise self.error(f"sort mismatch: {raw[1].text} has sort {s}, expected {sort}", raw[1])
            return Read(raw[1].text, self.index_term(raw[2]), sort)
        tok = raw[1]
        th = self.theory(sort)
        if isinstance(th, Enumerated):
            if tok.text not in th.values:
                raise self.error(f"{tok.text!r} is not a value of sort {sort}", tok)
            return EConst(tok.text, sort)
        if tok.kind != "num":
            raise self.error(f"expected a rational numeral, found {tok.text!r}", tok)
        return EConst(Fraction(tok.text), sort)


def parse_spec(text: str, check: bool = True) -> SystemSpec:
    """Parse and sort-check a system description.

    With ``check`` the written case guards of every update are verified to
    be pairwise exclusive (under the transition guard) and, when there is no
    ``else`` branch, exhaustive.
    """
    spec = _Parser(text).parse()
    if check:
        check_partitions(spec)
    return spec


def check_partitions(spec: SystemSpec) -> None:
    engine = spec.engine()
    for t in spec.transitions:
        for array, fn in t.updates:
            vars_ = tuple(t.params) + (fn.param,)
            guards = [g for g, _ in fn.branches]
            for a in range(len(guards)):
                for b in range(a + 1, len(guards)):
                    s = ExistsForallSentence(vars_, (), conj(t.guard, guards[a], guards[b]), ())
                    if engine.check_sentence(s, minimize=False) is not None:
                        raise PartitionError(
                            f"transition {t.name}: case guards {a + 1} and {b + 1} of the update of {array} overlap")
            if fn.default is None:
                s = ExistsForallSentence(vars_, (), conj(t.guard, *(neg(g) for g in guards)), ())
                if engine.check_sentence(s, minimize=False) is not None:
                    raise PartitionError(f"transition {t.name}: case guards of the update of {array} are not exhaustive")


def load_spec(path) -> SystemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


# ---------------------------------------------------------------- printing


def _theory_text(th) -> str:
    if isinstance(th, BooleanTheory):
        return "bool"
    if isinstance(th, Enumerated):
        return "enum {" + ", ".join(th.values) + "}"
    return "rational"


def format_spec(spec: SystemSpec) -> str:
    """Render a system in the input format (re-parses to an equal value)."""
    lines = [f"system {spec.name}"]
    it = spec.index_theory
    lines.append(f"index-theory {it.kind}" + (f" origin {' '.join(it.constants)}" if it.constants else ""))
    for sort, th in spec.sorts:
        lines.append(f"elem {sort.name} = {_theory_text(th)}")
    for name, sort in spec.arrays:
        lines.append(f"array {name} : {sort.name}")
    for b in spec.init:
        lines.append("init " + _quant("forall", b.vars, b.matrix))
    for t in spec.transitions:
        head = f"transition {t.name}"
        if t.params:
            head += " exists " + " ".join(v.name for v in t.params)
        lines.append(head)
        if t.guard != TRUE:
            lines.append(f"  guard {t.guard}")
        for array, fn in t.updates:
            if not fn.branches:
                lines.append(f"  update {array}[{fn.param}] := {fn.default}")
                continue
            parts = [f"{g} -> {v}" for g, v in fn.branches]
            if fn.default is not None:
                parts.append(f"else -> {fn.default}")
            lines.append(f"  update {array}[{fn.param}] case " + "\n    ; ".join(parts))
    for u in spec.unsafe:
        lines.append("unsafe " + _quant("exists", u.vars, u.matrix))
    for s in spec.suggested:
        lines.append("suggest_invariant " + _quant("exists", s.vars, s.matrix))
    return "\n".join(lines) + "\n"


def _quant(q: str, vars_, matrix) -> str:
    if not vars_:
        return str(matrix)
    return f"{q} {' '.join(v.name for v in vars_)} . {matrix}"


def corpus_options(text: str) -> list[str]:
    """Command-line options recorded in ``#!`` comment lines of a spec file."""
    out: list = []
    for line in text.splitlines():
        if line.startswith("#!"):
            out.extend(line[2:].split())
    return out
