"""Decision procedure for existential-universal array sentences.

A sentence ``exists a, ui, ue. body and forall uj. psi`` is decided by
instantiating the universal index variables over the representative terms of
``ui`` and searching the resulting quantifier-free conjunction.  The search is
a case split over disjunctions with unit propagation; every leaf (and every
branching point, for pruning) is checked by guessing an arrangement of the
index terms, deciding the index literals, and handing the element literals,
with array reads abstracted per arrangement block, to the element theories.
"""

from __future__ import annotations

import itertools
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .logic import (
    TRUE,
    And,
    Const,
    Cube,
    EConst,
    EVar,
    Eq,
    ForallI,
    Formula,
    IConst,
    IVar,
    Lit,
    Not,
    Or,
    Read,
    Rel,
    Sort,
    atom_terms,
    eval_ground,
    fresh_index_vars,
    is_index_atom,
    is_index_term,
    map_atom,
    nnf,
    simplify,
    substitute,
)
from .theories import Enumerated, IndexStructure, IndexTheory, ElemTheory, arrangements_for


class SmtStats:
    """Thread-safe counter of top-level solver invocations by kind."""

    KINDS = ("safety", "fixpoint", "other")

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: Counter = Counter()

    def bump(self, kind: str) -> None:
        if kind not in self.KINDS:
            raise ValueError(kind)
        with self._lock:
            self._counts[kind] += 1

    @property
    def calls(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def breakdown(self) -> dict:
        with self._lock:
            return {k: self._counts[k] for k in self.KINDS}

    def __repr__(self) -> str:
        return f"SmtStats({self.breakdown()})"


@dataclass(frozen=True)
class ExistsForallSentence:
    """``exists index_vars elem_vars. body and AND_k forall blocks[k]``.

    The usual single-block shape ``exists ui ue forall uj. psi`` is built by
    :meth:`single`; several universal blocks are allowed because initial
    formulas may be conjunctions of universal formulas with different
    variable counts.
    """

    index_vars: tuple
    elem_vars: tuple = ()
    body: Formula = TRUE
    blocks: tuple = ()

    @classmethod
    def single(cls, index_vars: Sequence[IVar], elem_vars: Sequence[EVar], universal: Sequence[IVar],
               matrix: Formula) -> "ExistsForallSentence":
        if not universal:
            return cls(tuple(index_vars), tuple(elem_vars), matrix, ())
        return cls(tuple(index_vars), tuple(elem_vars), TRUE, (ForallI(tuple(universal), matrix),))

    def __str__(self) -> str:
        parts = [str(self.body)] + [f"(forall {' '.join(map(str, b.vars))} . {b.matrix})" for b in self.blocks]
        q = " ".join(map(str, tuple(self.index_vars) + tuple(self.elem_vars)))
        return (f"exists {q} . " if q else "") + " and ".join(parts)


@dataclass
class FiniteWitness:
    """A finite index model with array contents satisfying a sentence."""

    structure: IndexStructure
    index_assignment: dict
    arrays: dict  # array name -> tuple of values, one per index element
    elem_assignment: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.structure.size


# substituted literals shared by all contexts, keyed by (literal, images)
_INSTANCES: dict = {}


class _Ctx:
    """Partial assignment of atoms with cheap value propagation.

    With ``distinct`` all index terms are known to denote pairwise distinct
    elements (differentiated input), which lets index atoms be decided from
    the order/successor facts recorded so far.
    """

    __slots__ = ("truth", "known", "excluded", "domains", "kind", "consts", "distinct", "succ", "pred", "memo")

    def __init__(self, domains: Mapping, theory: IndexTheory | None = None, distinct: bool = False):
        self.truth: dict = {}
        self.known: dict = {}
        self.excluded: dict = {}
        self.domains = domains
        self.kind = theory.kind if theory is not None else "equality"
        self.consts = theory.const_terms if theory is not None else ()
        self.distinct = distinct
        self.succ: dict = {}
        self.pred: dict = {}
        self.memo: dict = {}

    def copy(self) -> "_Ctx":
        c = _Ctx.__new__(_Ctx)
        c.truth = dict(self.truth)
        c.known = dict(self.known)
        c.excluded = {k: set(v) for k, v in self.excluded.items()}
        c.domains = self.domains
        c.kind = self.kind
        c.consts = self.consts
        c.distinct = self.distinct
        c.succ = dict(self.succ)
        c.pred = dict(self.pred)
        c.memo = {}
        return c

    def instance(self, lit: Lit, vs: tuple, sigma: Mapping) -> tuple:
        """``(lit sigma, its value)``, memoized while the context is unchanged."""
        if len(vs) == 1:
            key = (lit, sigma[vs[0]])
        elif len(vs) == 2:
            key = (lit, sigma[vs[0]], sigma[vs[1]])
        else:
            key = (lit, *(sigma[v] for v in vs))
        r = self.memo.get(key)
        if r is None:
            inst = _INSTANCES.get(key)
            if inst is None:
                inst = substitute(lit, {v: sigma[v] for v in vs}) if vs else lit
                if len(_INSTANCES) > 200_000:
                    _INSTANCES.clear()
                _INSTANCES[key] = inst
            r = self.memo[key] = (inst, self.lit_value(inst))
        return r

    def _val(self, t):
        if isinstance(t, EConst):
            return t.value
        return self.known.get(t)

    def _index_value(self, a) -> bool | None:
        if isinstance(a, Eq):
            return False if self.distinct else None
        x, y = a.args
        if a.name == "S":
            if self.consts and y == self.consts[0]:
                return False
            if len(self.consts) > 1 and y == self.consts[1]:
                if x == self.consts[0]:
                    return True
                if self.distinct:
                    return False
            if self.distinct:
                if x in self.succ:
                    return self.succ[x] == y
                if y in self.pred:
                    return self.pred[y] == x
            return None
        if a.name == "<":
            t = self.truth.get(Rel("<", (y, x)))
            if t is True:
                return False
            if t is False and self.distinct:
                return True
        return None

    def lit_value(self, lit: Lit) -> bool | None:
        v = eval_ground(lit)
        if v is not None:
            return v
        a = lit.atom
        t = self.truth.get(a)
        if t is not None:
            return t == lit.positive
        if isinstance(a, Rel) or (isinstance(a, Eq) and is_index_term(a.lhs)):
            v = self._index_value(a)
            return None if v is None else v == lit.positive
        if isinstance(a, Eq):
            x, y = self._val(a.lhs), self._val(a.rhs)
            if x is not None and y is not None and isinstance(x, str):
                return (x == y) == lit.positive
            if x is not None and isinstance(x, str) and x in self.excluded.get(a.rhs, ()):
                return not lit.positive
            if y is not None and isinstance(y, str) and y in self.excluded.get(a.lhs, ()):
                return not lit.positive
        return None

    def value(self, f: Formula) -> bool | None:
        if isinstance(f, Lit):
            return self.lit_value(f)
        if isinstance(f, Const):
            return f.value
        if isinstance(f, And):
            res: bool | None = True
            for g in f.args:
                v = self.value(g)
                if v is False:
                    return False
                if v is None:
                    res = None
            return res
        if isinstance(f, Or):
            res = False
            for g in f.args:
                v = self.value(g)
                if v is True:
                    return True
                if v is None:
                    res = None
            return res
        if isinstance(f, Not):
            v = self.value(f.arg)
            return None if v is None else not v
        raise TypeError(f)

    def assert_lit(self, lit: Lit) -> bool:
        """Record ``lit``; False on immediate conflict."""
        v = self.lit_value(lit)
        if v is not None:
            return v
        a = lit.atom
        self.truth[a] = lit.positive
        if isinstance(a, Rel) and a.name == "S" and lit.positive:
            x, y = a.args
            self.succ[x] = y
            self.pred[y] = x
        if isinstance(a, Eq) and not is_index_term(a.lhs):
            for x, y in ((a.lhs, a.rhs), (a.rhs, a.lhs)):
                if isinstance(y, EConst) and isinstance(y.value, str) and not isinstance(x, EConst):
                    if lit.positive:
                        self.known[x] = y.value
                    else:
                        ex = self.excluded.setdefault(x, set())
                        ex.add(y.value)
                        dom = self.domains.get(x.sort)
                        if dom is not None:
                            left = [d for d in dom if d not in ex]
                            if len(left) == 1:
                                self.known[x] = left[0]
                            elif not left:
                                return False
        return True

    def literals(self) -> list:
        return [Lit(a, p) for a, p in self.truth.items()]


_MAX_CACHE = 20000


class Engine:
    """Instantiation-based decision procedure for one combination of theories."""

    def __init__(self, index_theory: IndexTheory, elem_theories: Mapping[Sort, ElemTheory],
                 arrays: Mapping[str, Sort] | None = None, stats: SmtStats | None = None):
        self.index = index_theory
        self.elem = dict(elem_theories)
        self.arrays = dict(arrays or {})
        self.stats = stats if stats is not None else SmtStats()
        self.domains = {s: th.values for s, th in self.elem.items() if isinstance(th, Enumerated)}
        self.dump_hook = None  # callable(kind, sentence) used by the SMT-LIB dump option
        self._cache: dict = {}

    # -- theory combination on a conjunction of literals -------------------

    def theory_check(self, lits: Iterable[Lit], extra_terms: Iterable = (), distinct: bool = False) -> FiniteWitness | None:
        """Decide a conjunction of literals by arrangement guessing.

        With ``distinct`` the index terms are known to be pairwise distinct
        (differentiated input) and only the discrete arrangement is tried.
        """
        lits = frozenset(lits)
        extra = tuple(extra_terms)
        key = (lits, extra, distinct)
        if key in self._cache:
            return self._cache[key]
        res = self._theory_check(lits, extra, distinct)
        if len(self._cache) > _MAX_CACHE:
            self._cache.clear()
        self._cache[key] = res
        return res

    def _theory_check(self, lits: frozenset, extra: tuple, distinct: bool) -> FiniteWitness | None:
        ilits = [l for l in lits if is_index_atom(l.atom)]
        elits = [l for l in lits if not is_index_atom(l.atom)]
        terms: list = []

        def note(t):
            if t not in terms:
                terms.append(t)

        for t in extra:
            note(t)
        for l in ilits:
            for t in atom_terms(l.atom):
                note(t)
        for l in elits:
            for t in atom_terms(l.atom):
                if isinstance(t, Read):
                    note(t.index)
        for c in self.index.const_terms:
            note(c)
        arrangements = [[[t] for t in terms]] if distinct else arrangements_for(terms, ilits)
        for blocks in arrangements:
            im = self.index.check_blocks(blocks, ilits)
            if im is None:
                continue
            where = im.assignment
            abstraction: dict = {}

            def absread(t, where=where, abstraction=abstraction):
                if isinstance(t, Read):
                    key = (t.array, where[t.index])
                    v = abstraction.get(key)
                    if v is None:
                        v = abstraction[key] = EVar(f"{t.array}@{key[1]}", t.sort)
                    return v
                return None

            by_sort: dict = {}
            for l in elits:
                a = map_atom(l.atom, absread)
                m = Lit(a, l.positive)
                g = eval_ground(m)
                if g is True:
                    continue
                if g is False:
                    by_sort = None
                    break
                by_sort.setdefault(a.lhs.sort, []).append(m)
            if by_sort is None:
                continue
            values: dict = {}
            ok = True
            for sort, sl in by_sort.items():
                model = self.elem[sort].solve(sl)
                if model is None:
                    ok = False
                    break
                values.update(model)
            if not ok:
                continue
            return self._witness(im.structure, where, abstraction, values)
        return None

    def _witness(self, structure, where, abstraction, values) -> FiniteWitness:
        arrays: dict = {}
        names = set(self.arrays) | {a for a, _ in abstraction}
        for name in sorted(names):
            sort = self.arrays.get(name) or next(v.sort for (a, _), v in abstraction.items() if a == name)
            cells = []
            for e in range(structure.size):
                var = abstraction.get((name, e))
                if var is not None and var in values:
                    cells.append(values[var])
                else:
                    cells.append(self._default(sort))
            arrays[name] = tuple(cells)
        elem_assignment = {v: x for v, x in values.items() if not any(v is w for w in abstraction.values())}
        return FiniteWitness(structure, dict(where), arrays, elem_assignment)

    def _default(self, sort: Sort):
        th = self.elem.get(sort)
        if isinstance(th, Enumerated):
            return th.values[0]
        from fractions import Fraction

        return Fraction(0)

    # -- propositional search over instances --------------------------------

    def _search(self, ctx: _Ctx, todo: list, terms: Sequence) -> FiniteWitness | None:
        ctx = ctx.copy()
        todo = list(todo)
        ors: list = []
        while True:
            while todo:
                f = todo.pop()
                if isinstance(f, Lit):
                    if not ctx.assert_lit(f):
                        return None
                    continue
                v = ctx.value(f)
                if v is True:
                    continue
                if v is False:
                    return None
                if isinstance(f, And):
                    todo.extend(f.args)
                elif isinstance(f, Or):
                    ors.append(f)
                else:
                    raise TypeError(f)
            pending = []
            for f in ors:
                live = [g for g in f.args if ctx.value(g) is not False]
                if any(ctx.value(g) is True for g in live):
                    continue
                if not live:
                    return None
                if len(live) == 1:
                    todo.append(live[0])
                else:
                    pending.append(Or(tuple(live)))
            ors = pending
            if not todo:
                break
        witness = self.theory_check(ctx.literals(), terms, ctx.distinct)
        if witness is None:
            return None
        if not ors:
            return witness
        best = min(ors, key=lambda f: len(f.args))
        rest = [f for f in ors if f is not best]
        for g in best.args:
            res = self._search(ctx, rest + [g], terms)
            if res is not None:
                return res
        return None

    # -- instantiation -----------------------------------------------------

    def _instances(self, block: ForallI, terms: Sequence, ctx: _Ctx) -> list | None:
        """Instances of a universal block that are not already true; None if one is false."""
        out = []
        for combo in itertools.product(terms, repeat=len(block.vars)):
            inst = nnf(simplify(substitute(block.matrix, dict(zip(block.vars, combo)))))
            v = ctx.value(inst)
            if v is True:
                continue
            if v is False:
                return None
            out.append(inst)
        return out

    def _negated_cube_instances(self, prior: Cube, terms: Sequence, ctx: _Ctx):
        """Clauses of ``forall prior.vars. not prior`` over ``terms``.

        Partial substitutions under which some literal of ``prior`` is
        already false in ``ctx`` are pruned (their instances are true).
        Returns the string "covered" when some instance is false.
        """
        pvars = set(prior.vars)
        lit_vars = [(lit, tuple(sorted(_ivars(lit) & pvars, key=lambda v: v.name))) for lit in prior.sorted_lits]
        # candidate terms per variable, filtered by the literals on that variable alone
        cands: dict = {}
        for v in prior.vars:
            unary = tuple((lit, vs) for lit, vs in lit_vars if vs == (v,))
            key = ("cands", unary, v)
            if key not in ctx.memo:
                ctx.memo[key] = [t for t in terms
                                 if not any(ctx.instance(lit, vs, {v: t})[1] is False for lit, vs in unary)]
            cands[v] = ctx.memo[key]
            if not cands[v]:
                return []
        # bind the most constrained variable first, then follow shared literals
        vars_: list = []
        left = set(prior.vars)
        links = {v: 0 for v in left}
        while left:
            v = min(left, key=lambda v: (-links[v], len(cands[v]), v.name))
            vars_.append(v)
            left.discard(v)
            for _, vs in lit_vars:
                if v in vs:
                    for w in vs:
                        if w in left:
                            links[w] += 1
        pos = {v: k for k, v in enumerate(vars_)}
        stage: list = [[] for _ in range(len(vars_) + 1)]
        for lit, vs in lit_vars:
            k = max((pos[v] + 1 for v in vs), default=0)
            stage[k].append((lit, vs))
        # with distinct terms the successor facts of ctx determine the
        # image of a variable linked by a positive S literal to a bound one
        follow: list = [[] for _ in vars_]
        if ctx.distinct and ctx.kind == "successor":
            for lit in prior.lits:
                a = lit.atom
                if lit.positive and isinstance(a, Rel) and a.name == "S":
                    x, y = a.args
                    if x in pos and y in pos:
                        if pos[x] < pos[y]:
                            follow[pos[y]].append((x, ctx.succ))
                        else:
                            follow[pos[x]].append((y, ctx.pred))
        clauses: list = []
        sigma: dict = {}

        def rec(k: int, open_lits: list):
            for lit, vs in stage[k]:
                inst, v = ctx.instance(lit, vs, sigma)
                if v is False:
                    return False
                if v is None:
                    open_lits = open_lits + [inst]
            if k == len(vars_):
                if not open_lits:
                    return True
                clauses.append(Or(tuple(~l for l in open_lits)) if len(open_lits) > 1 else ~open_lits[0])
                return False
            v = vars_[k]
            options = cands[v]
            for w, table in follow[k]:
                t = table.get(sigma[w])
                if t is not None:
                    options = [t] if t in options else []
                    break
            for t in options:
                sigma[v] = t
                if rec(k + 1, open_lits):
                    return True
            sigma.pop(v, None)
            return False

        if rec(0, []):
            return "covered"
        return clauses

    def _cube_ctx(self, c: Cube) -> _Ctx | None:
        ctx = _Ctx(self.domains, self.index, c.is_differentiated(self.index.const_terms))
        for lit in c.lits:
            if not ctx.assert_lit(lit):
                return None
        return ctx

    # -- public checks -----------------------------------------------------

    def check_sentence(self, s: ExistsForallSentence, minimize: bool = True) -> FiniteWitness | None:
        """Satisfiability of an existential-universal sentence (with witness)."""
        self.stats.bump("other")
        if self.dump_hook:
            self.dump_hook("sentence", s)
        ivars = list(s.index_vars)
        if not ivars and not self.index.constants:
            ivars = list(fresh_index_vars([IVar("_")], [v.name for v in s.index_vars], "w").values())
        terms = self.index.representative_terms(ivars)
        ctx = _Ctx(self.domains, self.index)
        todo = [nnf(simplify(s.body))]
        for block in s.blocks:
            inst = self._instances(block, terms, ctx)
            if inst is None:
                return None
            todo.extend(inst)
        w = self._search(ctx, todo, terms)
        if w is not None and minimize:
            w = _minimize(self, s, w)
        return w

    def check_cube_sat(self, c: Cube) -> bool:
        """Satisfiability of a primitive cube (the NotAppl test)."""
        self.stats.bump("other")
        if self.dump_hook:
            self.dump_hook("cube", ExistsForallSentence(c.vars, (), c.matrix, ()))
        distinct = c.is_differentiated(self.index.const_terms)
        return self.theory_check(c.lits, self.index.representative_terms(c.vars), distinct) is not None

    def check_safety(self, init: ForallI | Sequence[ForallI], c: Cube) -> bool:
        """True iff ``init and c`` is satisfiable."""
        self.stats.bump("safety")
        blocks = (init,) if isinstance(init, ForallI) else tuple(init)
        if self.dump_hook:
            self.dump_hook("safety", ExistsForallSentence(c.vars, (), c.matrix, blocks))
        ctx = self._cube_ctx(c)
        if ctx is None:
            return False
        terms = self.index.representative_terms(c.vars)
        todo: list = []
        for block in blocks:
            inst = self._instances(block, terms, ctx)
            if inst is None:
                return False
            todo.extend(inst)
        return self._search(ctx, todo, terms) is not None

    def check_fixpoint(self, c: Cube, prior: Sequence[Cube], require: Sequence[Cube] | None = None) -> bool:
        """True iff ``c and not K'`` is unsatisfiable for the priors ``K'``.

        Priors are conjoined newest first; the check stops at the first
        unsatisfiable prefix.  A model found for a prefix is kept and the
        search is only repeated once a new clause falsifies it.  With
        ``require``, the answer is False without any search unless one of the
        required priors has a non-trivial instance (the other priors are
        known not to cover ``c`` on their own).
        """
        ctx = self._cube_ctx(c)
        if ctx is None:
            return True
        terms = self.index.representative_terms(c.vars)
        consts = self.index.const_terms
        insts: dict = {}

        def instances(kp: Cube):
            if id(kp) not in insts:
                # a differentiated prior with more variables than available terms
                # has no injective instance, so its negation is trivially true
                if len(kp.vars) > len(terms) and kp.is_differentiated(consts):
                    insts[id(kp)] = []
                else:
                    insts[id(kp)] = self._negated_cube_instances(kp, terms, ctx)
            return insts[id(kp)]

        if require is not None:
            if not any(instances(kp) for kp in require):
                return False
        clauses: list = []
        used: list = []
        model: FiniteWitness | None = None
        for kp in reversed(list(prior)):
            inst = instances(kp)
            if inst == "covered":
                return True
            if not inst:
                continue
            clauses.extend(inst)
            used.append(kp)
            if model is not None and all(_holds(model, f) for f in inst):
                continue
            self.stats.bump("fixpoint")
            if self.dump_hook:
                self.dump_hook("fixpoint", fixpoint_sentence(c, used))
            model = self._search(ctx, clauses, terms)
            if model is None:
                return True
        return False

    def implies(self, lhs: Sequence[Cube], rhs: Sequence[Cube]) -> bool:
        """Whether the disjunction ``lhs`` implies the disjunction ``rhs``."""
        return all(not self.check_cube_sat(c) or self.check_fixpoint(c, rhs) for c in lhs)


def _holds(w: FiniteWitness, f: Formula) -> bool:
    """Truth of a quantifier-free formula over ``w``'s named terms (False if unknown)."""
    if isinstance(f, Or):
        return any(_holds(w, g) for g in f.args)
    if isinstance(f, And):
        return all(_holds(w, g) for g in f.args)
    if not isinstance(f, Lit):
        return False

    def val(t):
        if isinstance(t, (IVar, IConst)):
            return w.index_assignment.get(t)
        if isinstance(t, EConst):
            return t.value
        if isinstance(t, Read):
            e = w.index_assignment.get(t.index)
            vals = w.arrays.get(t.array)
            return None if e is None or vals is None else vals[e]
        return w.elem_assignment.get(t)

    a = f.atom
    args = [val(t) for t in atom_terms(a)]
    if any(x is None for x in args):
        return False
    if isinstance(a, Rel):
        v = w.structure.holds(a.name, tuple(args))
    elif isinstance(a, Eq):
        v = args[0] == args[1]
    else:
        v = args[0] < args[1]
    return v == f.positive


def fixpoint_sentence(c: Cube, prior: Sequence[Cube]) -> ExistsForallSentence:
    blocks = tuple(ForallI(kp.vars, Not(kp.matrix)) for kp in prior)
    return ExistsForallSentence(c.vars, (), c.matrix, blocks)


def _ivars(lit: Lit) -> set:
    out = set()
    for t in atom_terms(lit.atom):
        if isinstance(t, IVar):
            out.add(t)
        elif isinstance(t, Read) and isinstance(t.index, IVar):
            out.add(t.index)
    return out


def _minimize(engine: Engine, s: ExistsForallSentence, w: FiniteWitness) -> FiniteWitness:
    """Greedily drop index elements while the sentence stays true."""
    if s.elem_vars:
        return w
    from .oracle import Configuration, eval_sentence

    cfg = Configuration(w.structure, {k: v for k, v in w.arrays.items()})
    const_elems = {e for _, e in w.structure.consts}
    changed = True
    while changed and cfg.size > 1:
        changed = False
        for e in range(cfg.size):
            if e in const_elems:
                continue
            sub = cfg.restrict([x for x in range(cfg.size) if x != e])
            if eval_sentence(sub, s):
                cfg = sub
                const_elems = {x for _, x in cfg.structure.consts}
                changed = True
                break
    if cfg.size == w.size:
        return w
    return FiniteWitness(cfg.structure, {}, dict(cfg.arrays), {})
