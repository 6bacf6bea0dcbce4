"""Many-sorted terms, literals and quantifier-free formulas over arrays.

The language has one index sort, any number of element sorts and array
symbols mapping indexes to elements.  Formulas are immutable values; every
normalization used by the search (negation normal form, DNF, case-function
elimination, differentiation) lives here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

from .errors import InternalError


@dataclass(frozen=True)
class Sort:
    """A sort: the index sort or a named element sort."""

    name: str

    @property
    def is_index(self) -> bool:
        return self is INDEX or self.name == "INDEX"

    def __str__(self) -> str:
        return self.name


INDEX = Sort("INDEX")


def _cache_hash(cls):
    """Memoize the generated ``__hash__`` of a frozen dataclass of nested values."""
    compute = cls.__hash__

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = compute(self)
            object.__setattr__(self, "_hash", h)
            return h

    cls.__hash__ = __hash__
    return cls



# ---------------------------------------------------------------- terms


@_cache_hash
@dataclass(frozen=True)
class IVar:
    name: str

    @property
    def sort(self) -> Sort:
        return INDEX

    def __str__(self) -> str:
        return self.name


@_cache_hash
@dataclass(frozen=True)
class IConst:
    name: str

    @property
    def sort(self) -> Sort:
        return INDEX

    def __str__(self) -> str:
        return self.name


@_cache_hash
@dataclass(frozen=True)
class EVar:
    name: str
    sort: Sort

    def __str__(self) -> str:
        return self.name


@_cache_hash
@dataclass(frozen=True)
class EConst:
    """Element constant: an enumerated token or an exact rational."""

    value: Union[str, Fraction]
    sort: Sort

    def __str__(self) -> str:
        return format_value(self.value)


@_cache_hash
@dataclass(frozen=True)
class Read:
    """Array read ``array[index]``."""

    array: str
    index: "IndexTerm"
    sort: Sort

    def __post_init__(self):
        if not isinstance(self.index, (IVar, IConst)):
            raise InternalError(f"array {self.array} read at non-index term {self.index}")

    def __str__(self) -> str:
        return f"{self.array}[{self.index}]"


@_cache_hash
@dataclass(frozen=True)
class CaseApp:
    """Application of a case-defined function at an index term."""

    fn: "CaseFunction"
    at: "IndexTerm"

    @property
    def sort(self) -> Sort:
        return self.fn.sort

    def __str__(self) -> str:
        return f"{self.fn.name}({self.at})"


IndexTerm = Union[IVar, IConst]
ElemTerm = Union[EVar, EConst, Read, CaseApp]
Term = Union[IVar, IConst, EVar, EConst, Read, CaseApp]


def format_value(v: Union[str, Fraction]) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return str(v)


def is_index_term(t: Term) -> bool:
    return isinstance(t, (IVar, IConst))


_RANK = {IConst: 0, IVar: 1, EConst: 2, EVar: 3, Read: 4, CaseApp: 5}


def term_key(t: Term) -> tuple:
    """Total order on terms used to orient symmetric atoms."""
    if isinstance(t, Read):
        return (4, t.array, term_key(t.index))
    if isinstance(t, EConst):
        v = t.value
        return (2, t.sort.name, 0 if isinstance(v, Fraction) else 1, v if isinstance(v, Fraction) else Fraction(0), str(v))
    if isinstance(t, CaseApp):
        return (5, t.fn.name, term_key(t.at))
    return (_RANK[type(t)], t.name)


# ---------------------------------------------------------------- atoms


@_cache_hash
@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs}"

    def display(self, op: str = "=") -> str:
        lhs, rhs = self.lhs, self.rhs
        if isinstance(lhs, (EConst, IConst)) and not isinstance(rhs, (EConst, IConst)):
            lhs, rhs = rhs, lhs
        return f"{lhs} {op} {rhs}"


@_cache_hash
@dataclass(frozen=True)
class Lt:
    """Strict order between rational element terms."""

    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return f"{self.lhs} < {self.rhs}"


@_cache_hash
@dataclass(frozen=True)
class Rel:
    """Index relation symbol applied to index terms (``<`` or ``S``)."""

    name: str
    args: tuple

    def __str__(self) -> str:
        if self.name == "<":
            return f"{self.args[0]} < {self.args[1]}"
        return f"{self.name}({', '.join(map(str, self.args))})"


Atom = Union[Eq, Lt, Rel]


def atom_terms(a: Atom) -> tuple:
    if isinstance(a, Rel):
        return a.args
    return (a.lhs, a.rhs)


def is_index_atom(a: Atom) -> bool:
    if isinstance(a, Rel):
        return True
    if isinstance(a, Eq):
        return is_index_term(a.lhs)
    return False


def make_eq(lhs: Term, rhs: Term) -> Eq:
    if lhs.sort != rhs.sort:
        raise InternalError(f"sort mismatch in equation {lhs} = {rhs}")
    return Eq(lhs, rhs) if term_key(lhs) <= term_key(rhs) else Eq(rhs, lhs)


# ---------------------------------------------------------------- formulas


@_cache_hash
@dataclass(frozen=True)
class Lit:
    atom: Atom
    positive: bool = True

    def __invert__(self) -> "Lit":
        return Lit(self.atom, not self.positive)

    def __str__(self) -> str:
        if isinstance(self.atom, Eq):
            return self.atom.display("=" if self.positive else "!=")
        if self.positive:
            return str(self.atom)
        if isinstance(self.atom, Lt):
            return f"{self.atom.rhs} <= {self.atom.lhs}"
        if isinstance(self.atom, Rel) and self.atom.name == "<":
            return f"{self.atom.args[1]} <= {self.atom.args[0]}"
        return f"not {self.atom}"


@_cache_hash
@dataclass(frozen=True)
class And:
    args: tuple

    def __str__(self) -> str:
        if not self.args:
            return "true"
        return "(" + " and ".join(map(str, self.args)) + ")"


@_cache_hash
@dataclass(frozen=True)
class Or:
    args: tuple

    def __str__(self) -> str:
        if not self.args:
            return "false"
        return "(" + " or ".join(map(str, self.args)) + ")"


@_cache_hash
@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self) -> str:
        return f"not {self.arg}"


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)

Formula = Union[Lit, And, Or, Not, Const]


def eq(a: Term, b: Term) -> Lit:
    return Lit(make_eq(a, b), True)


def neq(a: Term, b: Term) -> Lit:
    return Lit(make_eq(a, b), False)


def lt(a: Term, b: Term) -> Lit:
    """``a < b``; dispatches on sort (index relation or rational order)."""
    if is_index_term(a):
        return Lit(Rel("<", (a, b)))
    return Lit(Lt(a, b))


def le(a: Term, b: Term) -> Lit:
    """``a <= b`` as the negation of ``b < a`` (total orders only)."""
    return ~lt(b, a)


def rel(name: str, *args: Term) -> Lit:
    return Lit(Rel(name, tuple(args)))


def conj(*fs: Formula) -> Formula:
    out: list = []
    for f in fs:
        if isinstance(f, Const):
            if not f.value:
                return FALSE
            continue
        if isinstance(f, And):
            out.extend(f.args)
        else:
            out.append(f)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(*fs: Formula) -> Formula:
    out: list = []
    for f in fs:
        if isinstance(f, Const):
            if f.value:
                return TRUE
            continue
        if isinstance(f, Or):
            out.extend(f.args)
        else:
            out.append(f)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def neg(f: Formula) -> Formula:
    if isinstance(f, Lit):
        return ~f
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return conj(implies(a, b), implies(b, a))


# ---------------------------------------------------------------- traversal


def map_term(t: Term, fn: Callable[[Term], Term | None]) -> Term:
    """Rebuild ``t`` bottom-up; ``fn`` may return a replacement or None."""
    if isinstance(t, Read):
        idx = map_term(t.index, fn)
        if idx is not t.index:
            t = Read(t.array, idx, t.sort)
    elif isinstance(t, CaseApp):
        at = map_term(t.at, fn)
        if at is not t.at:
            t = CaseApp(t.fn, at)
    r = fn(t)
    return t if r is None else r


def map_atom(a: Atom, fn: Callable[[Term], Term | None]) -> Atom:
    if isinstance(a, Rel):
        args = tuple(map_term(x, fn) for x in a.args)
        return a if args == a.args else Rel(a.name, args)
    lhs, rhs = map_term(a.lhs, fn), map_term(a.rhs, fn)
    if lhs is a.lhs and rhs is a.rhs:
        return a
    if isinstance(a, Eq):
        return make_eq(lhs, rhs)
    return Lt(lhs, rhs)


def map_formula(f: Formula, fn: Callable[[Term], Term | None]) -> Formula:
    if isinstance(f, Lit):
        a = map_atom(f.atom, fn)
        return f if a is f.atom else Lit(a, f.positive)
    if isinstance(f, And):
        return And(tuple(map_formula(g, fn) for g in f.args))
    if isinstance(f, Or):
        return Or(tuple(map_formula(g, fn) for g in f.args))
    if isinstance(f, Not):
        return Not(map_formula(f.arg, fn))
    return f


def iter_literals(f: Formula) -> Iterator[Lit]:
    if isinstance(f, Lit):
        yield f
    elif isinstance(f, (And, Or)):
        for g in f.args:
            yield from iter_literals(g)
    elif isinstance(f, Not):
        yield from iter_literals(f.arg)


def iter_subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Read):
        yield from iter_subterms(t.index)
    elif isinstance(t, CaseApp):
        yield from iter_subterms(t.at)


def formula_terms(f: Formula) -> set:
    out: set = set()
    for lit in iter_literals(f):
        for t in atom_terms(lit.atom):
            out.update(iter_subterms(t))
    return out


def index_vars_of(f: Formula) -> set:
    return {t for t in formula_terms(f) if isinstance(t, IVar)}


def reads_of(f: Formula) -> set:
    return {t for t in formula_terms(f) if isinstance(t, Read)}


def substitute(f: Formula, mapping: Mapping[Term, Term]) -> Formula:
    """Simultaneous, capture-free substitution of variables by terms."""
    for k, v in mapping.items():
        if k.sort != v.sort:
            raise InternalError(f"sort mismatch substituting {v} for {k}")
    if not mapping:
        return f
    return map_formula(f, lambda t: mapping.get(t) if isinstance(t, (IVar, EVar)) else None)


def substitute_term(t: Term, mapping: Mapping[Term, Term]) -> Term:
    return map_term(t, lambda s: mapping.get(s) if isinstance(s, (IVar, EVar)) else None)


# ---------------------------------------------------------------- simplification


def eval_ground(lit: Lit) -> bool | None:
    """Truth value of a literal decidable without a model, else None."""
    a = lit.atom
    val: bool | None = None
    if isinstance(a, Eq):
        if a.lhs == a.rhs:
            val = True
        elif isinstance(a.lhs, EConst) and isinstance(a.rhs, EConst):
            val = False
        elif isinstance(a.lhs, IConst) and isinstance(a.rhs, IConst):
            val = False  # index constants denote distinct elements
    elif isinstance(a, Lt):
        if a.lhs == a.rhs:
            val = False
        elif isinstance(a.lhs, EConst) and isinstance(a.rhs, EConst):
            val = a.lhs.value < a.rhs.value
    elif isinstance(a, Rel):
        if len(a.args) == 2 and a.args[0] == a.args[1] and a.name in ("<", "S"):
            val = False  # irreflexive order, acyclic successor
    if val is None:
        return None
    return val if lit.positive else not val


def simplify(f: Formula) -> Formula:
    if isinstance(f, Lit):
        v = eval_ground(f)
        return f if v is None else Const(v)
    if isinstance(f, And):
        return conj(*(simplify(g) for g in f.args))
    if isinstance(f, Or):
        return disj(*(simplify(g) for g in f.args))
    if isinstance(f, Not):
        return neg(simplify(f.arg))
    return f


def nnf(f: Formula, positive: bool = True) -> Formula:
    """Negation normal form: negations only on literals."""
    if isinstance(f, Lit):
        return f if positive else ~f
    if isinstance(f, Const):
        return f if positive else neg(f)
    if isinstance(f, Not):
        return nnf(f.arg, not positive)
    parts = [nnf(g, positive) for g in f.args]
    if isinstance(f, And) == positive:
        return conj(*parts)
    return disj(*parts)


def dnf(f: Formula) -> list[frozenset]:
    """Disjunctive normal form as a list of literal sets.

    Conjunctions containing a ground-false literal or a complementary pair
    are dropped; ground-true literals are removed.
    """
    f = nnf(f)
    out: list[frozenset] = []
    seen: set = set()
    for c in _dnf(f):
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def _dnf(f: Formula) -> list[frozenset]:
    if isinstance(f, Const):
        return [frozenset()] if f.value else []
    if isinstance(f, Lit):
        v = eval_ground(f)
        if v is None:
            return [frozenset([f])]
        return [frozenset()] if v else []
    if isinstance(f, Or):
        res: list = []
        for g in f.args:
            res.extend(_dnf(g))
        return res
    acc = [frozenset()]
    for g in f.args:
        part = _dnf(g)
        acc = [a | b for a in acc for b in part if not _clash(a, b)]
        if not acc:
            break
    return acc


def _clash(a: frozenset, b: frozenset) -> bool:
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    return any(~lit in big for lit in small)


def negate_to_dnf(f: Formula) -> list[frozenset]:
    """DNF of the negation of ``f``."""
    return dnf(Not(f))


# ---------------------------------------------------------------- quantified shells


@_cache_hash
@dataclass(frozen=True)
class ExistsI:
    """Existential index formula ``exists vars. matrix``."""

    vars: tuple
    matrix: Formula

    def __str__(self) -> str:
        if not self.vars:
            return str(self.matrix)
        return f"exists {' '.join(map(str, self.vars))} . {self.matrix}"


@_cache_hash
@dataclass(frozen=True)
class ForallI:
    """Universal index formula ``forall vars. matrix``."""

    vars: tuple
    matrix: Formula

    def __str__(self) -> str:
        if not self.vars:
            return str(self.matrix)
        return f"forall {' '.join(map(str, self.vars))} . {self.matrix}"


def _lit_key(lit: Lit) -> tuple:
    a = lit.atom
    return (0 if is_index_atom(a) else 1, tuple(term_key(t) for t in atom_terms(a)), type(a).__name__,
            getattr(a, "name", ""), not lit.positive)


@_cache_hash
@dataclass(frozen=True)
class Cube:
    """Existentially quantified conjunction of literals."""

    vars: tuple
    lits: frozenset

    @cached_property
    def sorted_lits(self) -> tuple:
        return tuple(sorted(self.lits, key=_lit_key))

    @property
    def matrix(self) -> Formula:
        return conj(*self.sorted_lits)

    def as_exists(self) -> ExistsI:
        return ExistsI(self.vars, self.matrix)

    @cached_property
    def index_lits(self) -> tuple:
        return tuple(lit for lit in self.sorted_lits if is_index_atom(lit.atom))

    @cached_property
    def elem_lits(self) -> tuple:
        return tuple(lit for lit in self.sorted_lits if not is_index_atom(lit.atom))

    @cached_property
    def reads(self) -> frozenset:
        return frozenset(reads_of(self.matrix))

    def is_differentiated(self, constants: Sequence[IConst] = ()) -> bool:
        terms = list(self.vars)
        for x, y in itertools.combinations(terms, 2):
            if neq(x, y) not in self.lits:
                return False
        for x in self.vars:
            for c in constants:
                if neq(x, c) not in self.lits:
                    return False
        return True

    def rename(self, mapping: Mapping[IVar, IVar]) -> "Cube":
        lits = frozenset(Lit(map_atom(l.atom, lambda t: mapping.get(t) if isinstance(t, IVar) else None), l.positive)
                         for l in self.lits)
        return Cube(tuple(mapping.get(v, v) for v in self.vars), lits)

    def canonical(self, prefix: str = "z") -> "Cube":
        """Rename variables to ``z1..zn`` in order of first appearance."""
        order: list = []
        for lit in self.sorted_lits:
            for t in atom_terms(lit.atom):
                for s in iter_subterms(t):
                    if isinstance(s, IVar) and s in self.vars and s not in order:
                        order.append(s)
        for v in self.vars:
            if v not in order:
                order.append(v)
        mapping = {v: IVar(f"{prefix}{k + 1}") for k, v in enumerate(order)}
        renamed = self.rename(mapping)
        return Cube(tuple(mapping[v] for v in order), renamed.lits)

    def __str__(self) -> str:
        body = " and ".join(map(str, self.sorted_lits)) or "true"
        if not self.vars:
            return body
        return f"exists {' '.join(map(str, self.vars))} . {body}"


# ---------------------------------------------------------------- case functions


@dataclass(frozen=True)
class CaseFunction:
    """Case-defined function of the universally bound index ``param``.

    Branch guards are the written guards; the ``default`` branch is taken
    where no written guard holds.  Free index variables other than
    ``param`` are the transition's existential parameters.
    """

    name: str
    param: IVar
    branches: tuple  # tuple[(Formula, Term)]
    default: Term | None
    sort: Sort

    def effective_branches(self) -> list:
        out = [(g, v) for g, v in self.branches]
        if self.default is not None:
            out.append((conj(*(neg(g) for g, _ in self.branches)), self.default))
        return out

    def instantiate(self, at: IndexTerm) -> list:
        sub = {self.param: at}
        return [(substitute(g, sub), substitute_term(v, sub)) for g, v in self.effective_branches()]

    def substitute(self, mapping: Mapping[Term, Term]) -> "CaseFunction":
        if self.param in mapping:
            raise InternalError("cannot substitute the bound parameter of a case function")
        branches = tuple((substitute(g, mapping), substitute_term(v, mapping)) for g, v in self.branches)
        default = None if self.default is None else substitute_term(self.default, mapping)
        return CaseFunction(self.name, self.param, branches, default, self.sort)

    def __str__(self) -> str:
        parts = [f"{g} -> {v}" for g, v in self.branches]
        if self.default is not None:
            parts.append(f"else -> {self.default}")
        return "case " + " ; ".join(parts)


@dataclass(frozen=True)
class TransitionRule:
    """Guarded transition in functional form.

    ``exists params. guard and forall j. a'[j] = F_a(params, j)`` for every
    updated array ``a``; arrays without an update keep their value.
    """

    name: str
    params: tuple
    guard: Formula
    updates: tuple  # tuple[(array name, CaseFunction)]

    @property
    def update_map(self) -> dict:
        return dict(self.updates)


def eliminate_case_functions(f: Formula) -> Formula:
    """Replace every case-function application by a case split.

    Each application ``F(t)`` is eliminated by rewriting ``f`` into
    ``or_b (guard_b(t) and f[F(t) := value_b(t)])``.  All occurrences of the
    same application are split together, innermost applications first.
    """
    while True:
        app = _innermost_case_app(f)
        if app is None:
            return f
        parts = []
        for guard, value in app.fn.instantiate(app.at):
            parts.append(conj(guard, map_formula(f, lambda t, app=app, value=value: value if t == app else None)))
        f = disj(*parts)


def _innermost_case_app(f: Formula) -> CaseApp | None:
    for t in formula_terms(f):
        if isinstance(t, CaseApp) and not any(isinstance(s, CaseApp) for s in iter_subterms(t.at)):
            return t
    return None


# ---------------------------------------------------------------- differentiation


class _Partial:
    """A conjunction under construction with union-find over index terms.

    ``apart`` maps a class root to the index terms it must differ from
    (negated equalities and the irreflexive index relations).
    """

    __slots__ = ("lits", "parent", "apart")

    def __init__(self, lits: frozenset = frozenset(), parent: dict | None = None, apart: dict | None = None):
        self.lits = lits
        self.parent = parent or {}
        self.apart = apart or {}

    def find(self, t):
        while t in self.parent:
            t = self.parent[t]
        return t

    def _separate(self, u, v, lits: frozenset) -> "_Partial | None":
        x, y = self.find(u), self.find(v)
        if x == y:
            return None
        apart = dict(self.apart)
        apart[x] = apart.get(x, frozenset()) | {y}
        apart[y] = apart.get(y, frozenset()) | {x}
        return _Partial(lits, self.parent, apart)

    def add(self, lit: Lit) -> "_Partial | None":
        if lit in self.lits:
            return self
        if ~lit in self.lits:
            return None
        lits = self.lits | {lit}
        a = lit.atom
        if isinstance(a, Rel) and lit.positive:
            return self._separate(a.args[0], a.args[1], lits)
        if isinstance(a, Eq) and is_index_term(a.lhs):
            if not lit.positive:
                return self._separate(a.lhs, a.rhs, lits)
            x, y = self.find(a.lhs), self.find(a.rhs)
            if x == y:
                return _Partial(lits, self.parent, self.apart)
            if isinstance(x, IConst) and isinstance(y, IConst):
                return None
            if isinstance(x, IConst):
                x, y = y, x
            # merge x into y
            ax, ay = self.apart.get(x, frozenset()), self.apart.get(y, frozenset())
            if any(self.find(z) == y for z in ax) or any(self.find(z) == x for z in ay):
                return None
            parent = dict(self.parent)
            parent[x] = y
            apart = self.apart
            if ax:
                apart = dict(apart)
                apart[y] = ay | ax
            return _Partial(lits, parent, apart)
        return _Partial(lits, self.parent, self.apart)

    def merge(self, other: "_Partial") -> "_Partial | None":
        acc: _Partial | None = self
        for lit in other.lits:
            acc = acc.add(lit)
            if acc is None:
                return None
        return acc


def _pdnf(f: Formula) -> list:
    """DNF with equality-aware pruning of contradictory conjunctions."""
    if isinstance(f, Const):
        return [_Partial()] if f.value else []
    if isinstance(f, Lit):
        v = eval_ground(f)
        if v is not None:
            return [_Partial()] if v else []
        return [_Partial().add(f)]
    if isinstance(f, Or):
        res: list = []
        for g in f.args:
            res.extend(_pdnf(g))
        return res
    acc = [_Partial()]
    # literals first, so that their equalities prune the disjunctive parts early
    args = sorted(f.args, key=lambda g: not isinstance(g, Lit))
    for g in args:
        part = _pdnf(g)
        nxt = []
        for a in acc:
            for b in part:
                m = a.merge(b)
                if m is not None:
                    nxt.append(m)
        acc = nxt
        if not acc:
            break
    return acc


def set_partitions(items: Sequence, can_join: Callable[[object, list], bool] | None = None) -> Iterator[list]:
    """All partitions of ``items`` into blocks, in a fixed order.

    ``can_join(item, block)`` may veto placing an item into an existing block.
    """
    items = list(items)

    def rec(k: int, blocks: list) -> Iterator[list]:
        if k == len(items):
            yield [list(b) for b in blocks]
            return
        x = items[k]
        for b in blocks:
            if can_join is None or can_join(x, b):
                b.append(x)
                yield from rec(k + 1, blocks)
                b.pop()
        blocks.append([x])
        yield from rec(k + 1, blocks)
        blocks.pop()

    return rec(0, [])


def obviously_unsat(lits: frozenset) -> bool:
    """Cheap syntactic refutation of a conjunction of literals."""
    values: dict = {}
    for lit in lits:
        if ~lit in lits:
            return True
        v = eval_ground(lit)
        if v is False:
            return True
        a = lit.atom
        if lit.positive and isinstance(a, Eq) and isinstance(a.rhs, EConst) and not isinstance(a.lhs, EConst):
            if isinstance(a.rhs.value, str):
                prev = values.setdefault(a.lhs, a.rhs.value)
                if prev != a.rhs.value:
                    return True
    return False


def to_primitive_differentiated(f: ExistsI, constants: Sequence[IConst] = ()) -> list[Cube]:
    """Rewrite an existential index formula into primitive differentiated cubes.

    The matrix is put in DNF; each disjunct is then split over every
    arrangement of its index variables (and the theory's index constants,
    which denote pairwise distinct elements).  Equated variables are merged by
    substitution, and all remaining pairwise disequalities are added.
    """
    matrix = eliminate_case_functions(f.matrix)
    constants = list(constants)
    out: list[Cube] = []
    seen: set = set()
    for part in _pdnf(nnf(matrix)):
        for cube in _differentiate(tuple(f.vars), part, constants):
            if cube not in seen:
                seen.add(cube)
                out.append(cube)
    return out


def differentiate_update(vars_: Sequence[IVar], guard: Formula, lits: Iterable[Lit],
                         updates: Mapping[str, CaseFunction], constants: Sequence[IConst] = ()) -> list[Cube]:
    """Cubes of ``exists vars. guard and lits[a[z] := F_a(z)]``.

    Equivalent to substituting the case-function applications and calling
    :func:`to_primitive_differentiated`, but the branch of every application
    is chosen once and the choice is pruned as soon as its guard conflicts
    with the equalities collected so far.
    """
    lits = list(lits)
    reads = sorted({r for lit in lits for t in atom_terms(lit.atom) for r in iter_subterms(t)
                    if isinstance(r, Read) and r.array in updates}, key=lambda r: (term_key(r.index), r.array))
    constants = list(constants)
    vars_ = tuple(vars_)
    out: list[Cube] = []
    seen: set = set()
    mapping: dict = {}

    def emit(part: _Partial) -> None:
        for cube in _differentiate(vars_, part, constants):
            if cube not in seen:
                seen.add(cube)
                out.append(cube)

    def apply(k: int, part: _Partial) -> _Partial | None:
        # literals whose last updated read is reads[k] are mapped as soon as
        # that read has its branch, so dead branches are cut early
        acc: _Partial | None = part
        for lit in due[k]:
            new = Lit(map_atom(lit.atom, mapping.get), lit.positive)
            v = eval_ground(new)
            if v is True:
                continue
            if v is False:
                return None
            acc = acc.add(new)
            if acc is None:
                return None
        return acc

    def rec(k: int, part: _Partial) -> None:
        if k == len(reads):
            emit(part)
            return
        r = reads[k]
        for parts, value in choices[k]:
            mapping[r] = value
            for gp in parts:
                m = part.merge(gp)
                if m is not None:
                    m = apply(k, m)
                    if m is not None:
                        rec(k + 1, m)
        mapping.pop(r, None)

    # literals without updated reads are added up front so that they prune
    # the branch choices (e.g. the cube's disequalities)
    choices = [[(_pdnf(nnf(g)), value) for g, value in updates[r.array].instantiate(r.index)] for r in reads]
    position = {r: k for k, r in enumerate(reads)}
    due: list[list[Lit]] = [[] for _ in reads]
    fixed = []
    for lit in lits:
        ks = [position[r] for t in atom_terms(lit.atom) for r in iter_subterms(t) if r in position]
        if ks:
            due[max(ks)].append(lit)
        else:
            fixed.append(lit)
    for base in _pdnf(nnf(eliminate_case_functions(guard))):
        for lit in fixed:
            base = base.add(lit)
            if base is None:
                break
        if base is not None:
            rec(0, base)
    return out


def _differentiate(vars_: tuple, part: _Partial, constants: list) -> Iterator[Cube]:
    # current classes from the union-find, restricted to vars and constants
    terms = list(vars_) + [c for c in constants]
    roots: dict = {}
    for t in terms:
        roots.setdefault(part.find(t), []).append(t)
    extra_terms = {part.find(t) for t in part.parent} - set(roots)
    if extra_terms:
        raise InternalError(f"free index terms outside the quantifier prefix: {extra_terms}")
    blocks = list(roots.values())
    diseq: set = set()
    for lit in part.lits:
        a = lit.atom
        if not lit.positive and isinstance(a, Eq) and is_index_term(a.lhs):
            x, y = part.find(a.lhs), part.find(a.rhs)
            diseq.add((x, y))
            diseq.add((y, x))
    block_root = [part.find(b[0]) for b in blocks]

    def has_const(bs: list) -> bool:
        return any(isinstance(t, IConst) for b in bs for t in blocks[b])

    def can_join(i: int, group: list) -> bool:
        if has_const([i]) and has_const(group):
            return False
        return all((block_root[i], block_root[j]) not in diseq for j in group)

    for grouping in set_partitions(range(len(blocks)), can_join):
        mapping: dict = {}
        reps: list = []
        for group in grouping:
            members = [t for b in group for t in blocks[b]]
            consts = [t for t in members if isinstance(t, IConst)]
            rep = consts[0] if consts else min((t for t in members if isinstance(t, IVar)), key=lambda v: vars_.index(v))
            reps.append(rep)
            for t in members:
                if t != rep:
                    mapping[t] = rep
        lits = set()
        bad = False
        for lit in part.lits:
            a = map_atom(lit.atom, lambda t: mapping.get(t) if is_index_term(t) else None)
            new = Lit(a, lit.positive)
            v = eval_ground(new)
            if v is True:
                continue
            if v is False:
                bad = True
                break
            lits.add(new)
        if bad:
            continue
        new_vars = tuple(v for v in vars_ if v in reps)
        for x, y in itertools.combinations(new_vars, 2):
            lits.add(neq(x, y))
        for x in new_vars:
            for c in constants:
                lits.add(neq(x, c))
        frozen = frozenset(lits)
        if obviously_unsat(frozen):
            continue
        yield Cube(new_vars, frozen)


def fresh_index_vars(base: Sequence[IVar], avoid: Iterable[str], prefix: str = "x") -> dict:
    """Map each variable in ``base`` to a fresh variable not in ``avoid``."""
    used = set(avoid)
    out = {}
    n = 1
    for v in base:
        while f"{prefix}{n}" in used:
            n += 1
        name = f"{prefix}{n}"
        used.add(name)
        out[v] = IVar(name)
    return out
