"""Index theories and element theories.

Index theories are relational (plus, for the successor theory, optional
distinct constants), locally finite and closed under substructures.  Each one
decides conjunctions of literals and enumerates its finite models.  Element
theories decide conjunctions of literals and eliminate existential element
variables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import InternalError, SpecError, UnsupportedOperation
from .logic import (
    FALSE,
    TRUE,
    EConst,
    EVar,
    Eq,
    Formula,
    IConst,
    Lit,
    Lt,
    Rel,
    Sort,
    conj,
    disj,
    eval_ground,
    is_index_term,
    set_partitions,
    substitute,
)

# ---------------------------------------------------------------- index side


@dataclass(frozen=True)
class IndexStructure:
    """Finite index model on the domain ``0..size-1``."""

    size: int
    rels: frozenset = frozenset()  # {(name, (e1, e2))}
    consts: tuple = ()  # ((name, element), ...)

    def holds(self, name: str, args: tuple) -> bool:
        return (name, args) in self.rels

    def const(self, name: str) -> int:
        for n, e in self.consts:
            if n == name:
                return e
        raise KeyError(name)

    def permute(self, perm: Sequence[int]) -> "IndexStructure":
        rels = frozenset((n, tuple(perm[x] for x in args)) for n, args in self.rels)
        return IndexStructure(self.size, rels, tuple((n, perm[e]) for n, e in self.consts))

    def restrict(self, keep: Sequence[int]) -> "IndexStructure":
        """Substructure on ``keep`` (renumbered in the given order)."""
        pos = {e: k for k, e in enumerate(keep)}
        rels = frozenset((n, tuple(pos[x] for x in args)) for n, args in self.rels if all(x in pos for x in args))
        consts = tuple((n, pos[e]) for n, e in self.consts)
        return IndexStructure(len(keep), rels, consts)

    def key(self) -> tuple:
        return (self.size, tuple(sorted(self.rels)), self.consts)


@dataclass(frozen=True)
class IndexModel:
    """A finite index structure together with an assignment of index terms."""

    structure: IndexStructure
    assignment: Mapping  # index term -> element


@dataclass(frozen=True)
class Arrangement:
    """A partition of a finite set of index variables."""

    blocks: tuple  # tuple of frozensets

    def __len__(self) -> int:
        return len(self.blocks)


def enumerate_arrangements(vars_: Sequence) -> list[Arrangement]:
    """All partitions of ``vars_`` (Bell-number many)."""
    return [Arrangement(tuple(frozenset(b) for b in p)) for p in set_partitions(list(vars_))]


KINDS = ("equality", "linear-order", "successor")


@dataclass(frozen=True)
class IndexTheory:
    """One of the shipped index theories.

    ``equality``: pure equality.  ``linear-order``: strict linear orders with
    ``<``.  ``successor``: finite substructures of the natural numbers with the
    graph ``S`` of the successor function, i.e. disjoint finite paths; the
    optional ``constants`` name the origin (no predecessor) and optionally its
    successor.
    """

    kind: str
    constants: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown index theory {self.kind!r}")
        if self.kind != "successor" and self.constants:
            raise SpecError(f"index theory {self.kind} has no constants")
        if len(self.constants) > 2 or len(set(self.constants)) != len(self.constants):
            raise SpecError("successor theory takes at most two distinct constants")

    @property
    def relations(self) -> dict:
        return {"equality": {}, "linear-order": {"<": 2}, "successor": {"S": 2}}[self.kind]

    @property
    def const_terms(self) -> tuple:
        return tuple(IConst(c) for c in self.constants)

    def representative_terms(self, vars_: Sequence) -> list:
        return list(vars_) + [c for c in self.const_terms if c not in vars_]

    # -- decision procedure on distinct elements --------------------------

    def check_distinct(self, n: int, const_elems: Mapping, pos: Iterable, neg: Iterable) -> tuple | None:
        """Decide relation facts over ``n`` pairwise distinct elements.

        ``pos``/``neg`` are ``(name, args)`` facts over ``0..n-1``.  Returns
        ``(structure, renumbering)`` or None when inconsistent.
        """
        pos = set(pos)
        neg = set(neg)
        for name, args in pos | neg:
            if name not in self.relations:
                raise SpecError(f"relation {name!r} not in the {self.kind} signature")
        if self.kind == "equality":
            return IndexStructure(n), list(range(n))
        if self.kind == "linear-order":
            edges = set()
            for _, (x, y) in pos:
                if x == y:
                    return None
                edges.add((x, y))
            for _, (x, y) in neg:
                if x != y:
                    edges.add((y, x))
            order = _toposort(n, edges)
            if order is None:
                return None
            renum = [0] * n
            for p, x in enumerate(order):
                renum[x] = p
            rels = frozenset(("<", (p, q)) for p in range(n) for q in range(p + 1, n))
            return IndexStructure(n, rels), renum
        # successor
        edges = {args for _, args in pos}
        if len(self.constants) == 2:
            edges.add((const_elems[self.constants[0]], const_elems[self.constants[1]]))
        if any(("S", e) in neg for e in edges):
            return None
        succ: dict = {}
        pred: dict = {}
        for x, y in edges:
            if x == y or succ.setdefault(x, y) != y or pred.setdefault(y, x) != x:
                return None
        if self.constants and const_elems[self.constants[0]] in pred:
            return None
        if _toposort(n, edges) is None:
            return None
        consts = tuple((c, const_elems[c]) for c in self.constants)
        return IndexStructure(n, frozenset(("S", e) for e in edges), consts), list(range(n))

    def solve(self, lits: Sequence[Lit]) -> IndexModel | None:
        """Satisfiability of a conjunction of index literals."""
        terms: list = []
        for lit in lits:
            a = lit.atom
            args = a.args if isinstance(a, Rel) else (a.lhs, a.rhs)
            if isinstance(a, Lt) or not all(is_index_term(t) for t in args):
                raise SpecError(f"literal {lit} is not an index literal")
            for t in args:
                if t not in terms:
                    terms.append(t)
        for c in self.const_terms:
            if c not in terms:
                terms.append(c)
        for blocks in arrangements_for(terms, lits):
            res = self.check_blocks(blocks, lits)
            if res is not None:
                return res
        return None

    def check_blocks(self, blocks: Sequence[Sequence], lits: Iterable[Lit]) -> IndexModel | None:
        where = {t: k for k, b in enumerate(blocks) for t in b}
        pos, neg = set(), set()
        for lit in lits:
            a = lit.atom
            if isinstance(a, Rel):
                fact = (a.name, tuple(where[t] for t in a.args))
                (pos if lit.positive else neg).add(fact)
        const_elems = {c.name: where[c] for c in self.const_terms if c in where}
        res = self.check_distinct(len(blocks), const_elems, pos, neg)
        if res is None:
            return None
        structure, renum = res
        return IndexModel(structure, {t: renum[k] for t, k in where.items()})

    # -- finite models -----------------------------------------------------

    def is_model(self, s: IndexStructure) -> bool:
        const_elems = dict(s.consts)
        if set(const_elems) != set(self.constants) or len(set(const_elems.values())) != len(const_elems):
            return False
        pos = set(s.rels)
        if self.kind == "linear-order":
            rel = {args for _, args in pos}
            for x, y in itertools.product(range(s.size), repeat=2):
                if x != y and ((x, y) in rel) == ((y, x) in rel):
                    return False
            return _toposort(s.size, rel) is not None
        neg = {(n, args) for n in self.relations for args in itertools.product(range(s.size), repeat=2)} - pos
        return self.check_distinct(s.size, const_elems, pos, neg) is not None

    def structures(self, n: int) -> list[IndexStructure]:
        """All models with ``n`` elements, one per isomorphism class."""
        if n < len(self.constants):
            return []
        if self.kind == "equality":
            return [IndexStructure(n)]
        if self.kind == "linear-order":
            return [IndexStructure(n, frozenset(("<", (p, q)) for p in range(n) for q in range(p + 1, n)))]
        # disjoint paths; the constants start the first path, which is
        # therefore told apart from the others, which only differ in length
        fixed = len(self.constants)
        consts = tuple((c, k) for k, c in enumerate(self.constants))
        out = []
        for head in range(fixed, n + 1) if fixed else [0]:
            for lengths in _integer_partitions(n - head):
                paths = ([list(range(head))] if head else [])
                nxt = head
                for length in lengths:
                    paths.append(list(range(nxt, nxt + length)))
                    nxt += length
                edges = frozenset(("S", (x, y)) for path in paths for x, y in zip(path, path[1:]))
                out.append(IndexStructure(n, edges, consts))
        return out

    def _const_fixing_perms(self, n: int) -> list:
        fixed = len(self.constants)  # constants sit at 0..fixed-1
        out = []
        for rest in itertools.permutations(range(fixed, n)):
            out.append(tuple(range(fixed)) + rest)
        return out

    def automorphisms(self, s: IndexStructure) -> list:
        if self.kind == "linear-order":
            return [tuple(range(s.size))]
        key = s.key()
        out = []
        for perm in itertools.permutations(range(s.size)):
            if s.permute(perm).key() == key:
                out.append(perm)
        return out


def _integer_partitions(n: int, largest: int | None = None) -> Iterator[list]:
    """Non-increasing lists of positive integers summing to ``n``."""
    if n == 0:
        yield []
        return
    for k in range(min(n, largest or n), 0, -1):
        for rest in _integer_partitions(n - k, k):
            yield [k] + rest


def _toposort(n: int, edges: Iterable) -> list | None:
    succ: dict = {x: [] for x in range(n)}
    indeg = [0] * n
    for x, y in set(edges):
        succ[x].append(y)
        indeg[y] += 1
    ready = [x for x in range(n) if indeg[x] == 0]
    out = []
    while ready:
        ready.sort()
        x = ready.pop(0)
        out.append(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                ready.append(y)
    return out if len(out) == n else None


def arrangements_for(terms: Sequence, lits: Iterable[Lit]) -> Iterator[list]:
    """Partitions of index ``terms`` compatible with the (dis)equalities in ``lits``.

    Index constants always land in distinct blocks.
    """
    parent: dict = {}

    def find(t):
        while t in parent:
            t = parent[t]
        return t

    diseq = []
    for lit in lits:
        a = lit.atom
        if isinstance(a, Eq) and is_index_term(a.lhs):
            if lit.positive:
                x, y = find(a.lhs), find(a.rhs)
                if x != y:
                    parent[x] = y
            else:
                diseq.append((a.lhs, a.rhs))
    groups: dict = {}
    for t in terms:
        groups.setdefault(find(t), []).append(t)
    glist = list(groups.values())
    gid = {t: k for k, g in enumerate(glist) for t in g}
    conflict = set()
    for x, y in diseq:
        gx, gy = gid[x], gid[y]
        if gx == gy:
            return
        conflict.add((gx, gy))
        conflict.add((gy, gx))
    has_const = [any(isinstance(t, IConst) for t in g) for g in glist]
    if any(sum(isinstance(t, IConst) for t in g) > 1 for g in glist):
        return

    def can_join(i: int, block: list) -> bool:
        if has_const[i] and any(has_const[j] for j in block):
            return False
        return all((i, j) not in conflict for j in block)

    for p in set_partitions(range(len(glist)), can_join):
        yield [[t for gi in block for t in glist[gi]] for block in p]


def representative_terms(th: IndexTheory, vars_: Sequence) -> list:
    return th.representative_terms(vars_)


def solve_index_conjunction(th: IndexTheory, lits: Sequence[Lit]) -> IndexModel | None:
    return th.solve(lits)


# ---------------------------------------------------------------- element side


class ElemTheory:
    """Base class of element theories over a single element sort."""

    kind = "abstract"
    has_qe = True

    def __init__(self, sort: Sort):
        self.sort = sort

    def check_constant(self, c: EConst) -> None:
        raise NotImplementedError

    def solve(self, lits: Sequence[Lit]) -> dict | None:
        raise NotImplementedError

    def eliminate(self, vars_: Sequence[EVar], lits: Sequence[Lit]) -> Formula:
        raise NotImplementedError

    def _vars(self, lits: Iterable[Lit]) -> list:
        out: list = []
        for lit in lits:
            for t in (lit.atom.lhs, lit.atom.rhs):
                if isinstance(t, EConst):
                    self.check_constant(t)
                elif not isinstance(t, EVar):
                    raise InternalError(f"element solver got non-variable term {t}")
                elif t not in out:
                    out.append(t)
        return out

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, self.sort))


class Enumerated(ElemTheory):
    """Finite enumerated data type: distinct constants exhausting the domain."""

    kind = "enum"

    def __init__(self, sort: Sort, values: Sequence[str]):
        super().__init__(sort)
        if not values or len(set(values)) != len(values):
            raise SpecError(f"enumerated sort {sort} needs distinct constants")
        self.values = tuple(values)

    def check_constant(self, c: EConst) -> None:
        if c.value not in self.values:
            raise SpecError(f"unknown constant {c.value!r} of sort {self.sort}")

    def const(self, v: str) -> EConst:
        return EConst(v, self.sort)

    def solve(self, lits: Sequence[Lit]) -> dict | None:
        vars_ = self._vars(lits)
        for lit in lits:
            if not isinstance(lit.atom, Eq):
                raise SpecError(f"literal {lit} not in the enumerated signature")
        cons = [(lit.atom.lhs, lit.atom.rhs, lit.positive) for lit in lits]
        domains = {v: set(self.values) for v in vars_}
        # unary constraints
        rest = []
        for x, y, pos in cons:
            if isinstance(x, EConst) and isinstance(y, EConst):
                if (x.value == y.value) != pos:
                    return None
            elif isinstance(y, EConst) or isinstance(x, EConst):
                v, c = (x, y) if isinstance(y, EConst) else (y, x)
                domains[v] = domains[v] & {c.value} if pos else domains[v] - {c.value}
            else:
                rest.append((x, y, pos))
        if any(not d for d in domains.values()):
            return None
        order = sorted(vars_, key=lambda v: len(domains[v]))
        assign: dict = {}

        def ok(v) -> bool:
            for x, y, pos in rest:
                if x in assign and y in assign and (v is x or v is y):
                    if (assign[x] == assign[y]) != pos:
                        return False
            return True

        def rec(k: int) -> bool:
            if k == len(order):
                return True
            v = order[k]
            for val in sorted(domains[v], key=self.values.index):
                assign[v] = val
                if ok(v) and rec(k + 1):
                    return True
            del assign[v]
            return False

        return dict(assign) if rec(0) else None

    def eliminate(self, vars_: Sequence[EVar], lits: Sequence[Lit]) -> Formula:
        disjuncts = [list(lits)]
        for d in vars_:
            nxt = []
            for dj in disjuncts:
                t = _defining_term(d, dj)
                if t is not None:
                    nxt.append(_subst_lits(dj, {d: t}))
                elif any(d in (l.atom.lhs, l.atom.rhs) for l in dj):
                    for val in self.values:
                        nxt.append(_subst_lits(dj, {d: self.const(val)}))
                else:
                    nxt.append(dj)
            disjuncts = [dj for dj in nxt if dj is not None]
        return _to_formula(disjuncts)

    def __repr__(self):
        return f"Enumerated({self.sort}, {self.values})"


class BooleanTheory(Enumerated):
    kind = "bool"

    def __init__(self, sort: Sort):
        super().__init__(sort, ("false", "true"))

    def __repr__(self):
        return f"Boolean({self.sort})"


def _defining_term(d: EVar, lits: Sequence[Lit]):
    for lit in lits:
        a = lit.atom
        if lit.positive and isinstance(a, Eq):
            if a.lhs == d and a.rhs != d:
                return a.rhs
            if a.rhs == d and a.lhs != d:
                return a.lhs
    return None


def _subst_lits(lits: Sequence[Lit], mapping: Mapping) -> list | None:
    out = []
    for lit in lits:
        new = substitute(lit, mapping)
        v = eval_ground(new)
        if v is True:
            continue
        if v is False:
            return None
        if new not in out:
            out.append(new)
    return out


def _to_formula(disjuncts: Sequence[Sequence[Lit]]) -> Formula:
    parts = []
    for dj in disjuncts:
        if not dj:
            return TRUE
        parts.append(conj(*dj))
    return disj(*parts) if parts else FALSE


# ----- dense linear order over the rationals (Fourier-Motzkin) -------------


@dataclass(frozen=True)
class LinCon:
    """``sum(coeffs) + const < 0`` (strict) or ``<= 0``."""

    coeffs: tuple  # sorted ((EVar, Fraction), ...), no zero coefficients
    const: Fraction
    strict: bool

    def coeff(self, v) -> Fraction:
        for x, c in self.coeffs:
            if x == v:
                return c
        return Fraction(0)


def _linform(t) -> tuple:
    if isinstance(t, EConst):
        return {}, Fraction(t.value)
    return {t: Fraction(1)}, Fraction(0)


def _mk(coeffs: dict, const: Fraction, strict: bool) -> LinCon:
    items = tuple(sorted(((v, c) for v, c in coeffs.items() if c != 0), key=lambda vc: vc[0].name))
    return LinCon(items, const, strict)


def _diff(x, y, strict: bool) -> LinCon:
    """Constraint ``x - y < 0`` or ``x - y <= 0``."""
    cx, kx = _linform(x)
    cy, ky = _linform(y)
    coeffs = dict(cx)
    for v, c in cy.items():
        coeffs[v] = coeffs.get(v, 0) - c
    return _mk(coeffs, kx - ky, strict)


def _lit_constraints(lit: Lit) -> list[list[LinCon]]:
    """Alternatives (disjunction) of constraint conjunctions for one literal."""
    a = lit.atom
    x, y = a.lhs, a.rhs
    if isinstance(a, Lt):
        return [[_diff(x, y, True)]] if lit.positive else [[_diff(y, x, False)]]
    if isinstance(a, Eq):
        if lit.positive:
            return [[_diff(x, y, False), _diff(y, x, False)]]
        return [[_diff(x, y, True)], [_diff(y, x, True)]]
    raise SpecError(f"literal {lit} not in the rational-order signature")


def _ground_ok(c: LinCon) -> bool:
    return c.const < 0 if c.strict else c.const <= 0


def _combine(up: LinCon, lo: LinCon, v) -> LinCon:
    a, b = up.coeff(v), lo.coeff(v)  # a > 0, b < 0
    coeffs: dict = {}
    for x, c in up.coeffs:
        coeffs[x] = coeffs.get(x, 0) + c * -b
    for x, c in lo.coeffs:
        coeffs[x] = coeffs.get(x, 0) + c * a
    coeffs.pop(v, None)
    return _mk(coeffs, up.const * -b + lo.const * a, up.strict or lo.strict)


def fm_eliminate(cons: Sequence[LinCon], v) -> tuple[list, list, list]:
    """One Fourier-Motzkin step: returns (result, upper bounds, lower bounds)."""
    ups, los, rest = [], [], []
    for c in cons:
        k = c.coeff(v)
        (ups if k > 0 else los if k < 0 else rest).append(c)
    out = list(rest)
    for u in ups:
        for l in los:
            out.append(_combine(u, l, v))
    return out, ups, los


def fm_solve(cons: Sequence[LinCon]) -> dict | None:
    """Satisfiability with a rational model, by Fourier-Motzkin elimination."""
    vars_: list = []
    for c in cons:
        for v, _ in c.coeffs:
            if v not in vars_:
                vars_.append(v)
    stages = []
    cur = list(dict.fromkeys(cons))
    for v in vars_:
        cur, ups, los = fm_eliminate(cur, v)
        kept = []
        for c in cur:
            if not c.coeffs:
                if not _ground_ok(c):
                    return None
            else:
                kept.append(c)
        cur = list(dict.fromkeys(kept))
        stages.append((v, ups, los))
    if any(not _ground_ok(c) for c in cur):
        return None
    model: dict = {}
    for v, ups, los in reversed(stages):
        hi = lo = None
        hi_strict = lo_strict = False
        for c in ups:
            b = _bound(c, v, model)
            if hi is None or b < hi:
                hi, hi_strict = b, c.strict
            elif b == hi:
                hi_strict = hi_strict or c.strict
        for c in los:
            b = _bound(c, v, model)
            if lo is None or b > lo:
                lo, lo_strict = b, c.strict
            elif b == lo:
                lo_strict = lo_strict or c.strict
        if hi is None and lo is None:
            val = Fraction(0)
        elif hi is None:
            val = lo + 1
        elif lo is None:
            val = hi - 1
        elif lo == hi:
            if lo_strict or hi_strict:
                raise InternalError("Fourier-Motzkin back-substitution failed")
            val = lo
        else:
            val = (lo + hi) / 2
        model[v] = val
    return model


def _bound(c: LinCon, v, model: Mapping) -> Fraction:
    k = c.coeff(v)
    rest = c.const + sum(coef * model[x] for x, coef in c.coeffs if x != v)
    return -rest / k


def _constraint_to_lit(c: LinCon, sort: Sort) -> Formula:
    if not c.coeffs:
        return TRUE if _ground_ok(c) else FALSE
    if len(c.coeffs) == 1:
        (x, a), = c.coeffs
        k = EConst(-c.const / a, sort)
        if a > 0:
            return Lit(Lt(x, k)) if c.strict else Lit(Lt(k, x), False)
        return Lit(Lt(k, x)) if c.strict else Lit(Lt(x, k), False)
    if len(c.coeffs) == 2 and c.const == 0:
        (x, a), (y, b) = c.coeffs
        if a == -b:
            if a < 0:
                x, y = y, x
            return Lit(Lt(x, y)) if c.strict else Lit(Lt(y, x), False)
    raise InternalError(f"constraint {c} is not an order constraint")


class Rationals(ElemTheory):
    """Dense linear order without endpoints over exact rationals."""

    kind = "rational"

    def check_constant(self, c: EConst) -> None:
        if not isinstance(c.value, Fraction):
            raise SpecError(f"unknown constant {c.value!r} of sort {self.sort}")

    def solve(self, lits: Sequence[Lit]) -> dict | None:
        self._vars(lits)
        base: list = []
        splits: list = []
        for lit in lits:
            alts = _lit_constraints(lit)
            if len(alts) == 1:
                base.extend(alts[0])
            else:
                splits.append(alts)
        if fm_solve(base) is None:
            return None
        return self._branch(base, splits)

    def _branch(self, base: list, splits: list) -> dict | None:
        if not splits:
            return fm_solve(base)
        for alt in splits[0]:
            cand = base + alt
            if fm_solve(cand) is not None:
                model = self._branch(cand, splits[1:])
                if model is not None:
                    return model
        return None

    def eliminate(self, vars_: Sequence[EVar], lits: Sequence[Lit]) -> Formula:
        self._vars(lits)
        disjuncts = [list(lits)]
        for d in vars_:
            nxt = []
            for dj in disjuncts:
                t = _defining_term(d, dj)
                if t is not None:
                    r = _subst_lits(dj, {d: t})
                    if r is not None:
                        nxt.append(r)
                    continue
                mentions = [l for l in dj if d in (l.atom.lhs, l.atom.rhs)]
                others = [l for l in dj if l not in mentions]
                if not mentions:
                    nxt.append(dj)
                    continue
                choices = [_lit_constraints(l) for l in mentions]
                for combo in itertools.product(*choices):
                    cons = [c for alt in combo for c in alt]
                    res, _, _ = fm_eliminate(cons, d)
                    out = list(others)
                    ok = True
                    for c in dict.fromkeys(res):
                        f = _constraint_to_lit(c, self.sort)
                        if f == FALSE:
                            ok = False
                            break
                        if f != TRUE and f not in out:
                            out.append(f)
                    if ok:
                        nxt.append(out)
            disjuncts = nxt
        return _to_formula(disjuncts)

    def __repr__(self):
        return f"Rationals({self.sort})"


def solve_elem_conjunction(th: ElemTheory, lits: Sequence[Lit]) -> dict | None:
    return th.solve(lits)


def eliminate_elem_quantifier(th: ElemTheory, vars_: Sequence[EVar], psi: Sequence[Lit] | Formula) -> Formula:
    """Quantifier-free equivalent of ``exists vars_. psi`` for a conjunction psi."""
    if not th.has_qe:
        raise UnsupportedOperation(f"theory {th!r} has no quantifier elimination")
    if not isinstance(psi, (list, tuple)):
        from .logic import And

        if isinstance(psi, Lit):
            psi = [psi]
        elif isinstance(psi, And) and all(isinstance(g, Lit) for g in psi.args):
            psi = list(psi.args)
        elif psi == TRUE:
            psi = []
        else:
            raise InternalError("eliminate_elem_quantifier expects a conjunction of literals")
    return th.eliminate(list(vars_), list(psi))
