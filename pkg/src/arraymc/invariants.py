"""Invariant synthesis: candidate generation, bounded verification, SInv.

A candidate is an existential formula ``Q'`` (a list of cubes) whose
negation is a tentative universal invariant.  Candidates are derived from a
cube ``Q`` of the backward search so that ``Q -> Q'`` holds; they are only
used once a resource-bounded backward search from ``Q'`` proves them safe,
in which case the negation of the fix-point it computed is a real safety
invariant.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import ConfigError
from .logic import (
    Cube,
    Eq,
    EVar,
    ExistsI,
    ForallI,
    Formula,
    IVar,
    Lit,
    Read,
    atom_terms,
    conj,
    disj,
    eq,
    implies,
    is_index_atom,
    iter_subterms,
    map_atom,
    map_formula,
    neg,
    rel,
    substitute,
)
from .reachability import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MAX_NODES,
    ReachResult,
    breach,
    preimage_cubes,
)
from .smt import Engine
from .theories import eliminate_elem_quantifier

INDEX_ABSTRACTION = "index-abstraction"
SIGNATURE_ABSTRACTION = "signature-abstraction"
USER = "user"

DEFAULT_INV_DEPTH = 6
DEFAULT_INV_NODES = 200


@dataclass(frozen=True)
class Candidate:
    """Tentative invariant ``not (c1 or ... or cn)`` given by its cubes."""

    cubes: tuple
    origin: str

    @property
    def cube(self) -> Cube:
        return self.cubes[0]

    def __str__(self) -> str:
        return " or ".join(f"({c})" for c in self.cubes)


@dataclass(frozen=True)
class VerifiedInvariant:
    """A safety invariant ``not B`` with ``B`` the fix-point of a bounded run."""

    cubes: tuple
    source: Candidate

    def formulas(self) -> list[ForallI]:
        """The invariant as a conjunction of universal formulas."""
        return [ForallI(c.vars, neg(c.matrix)) for c in self.cubes]

    def __str__(self) -> str:
        return f"not ({self.source})  [{len(self.cubes)} cubes]"


@dataclass(frozen=True)
class NotProved:
    candidate: Candidate
    reason: str  # "unsafe" | "depth" | "nodes" | "time"


# ---------------------------------------------------------------- Min


def min_formula(c: Cube, constants: Sequence = ()) -> Formula:
    """``phi and AND_sigma (phi sigma -> every variable is hit by sigma)``.

    ``sigma`` ranges over the maps from the variables of ``c`` to its
    representative index terms (variables and constants); the formula holds
    exactly on the tuples that generate a minimal configuration satisfying
    the existential closure of ``c``.
    """
    vars_ = tuple(c.vars)
    terms = list(vars_) + [k for k in constants if k not in vars_]
    phi = c.matrix
    parts: list = [phi]
    for images in itertools.product(terms, repeat=len(vars_)):
        sigma = dict(zip(vars_, images))
        if set(images) >= set(vars_):
            continue  # surjective onto the variables: the conclusion holds
        hit = conj(*(disj(*(eq(t, v) for t in images)) for v in vars_))
        parts.append(implies(substitute(phi, sigma), hit))
    return conj(*parts)


# ---------------------------------------------------------------- projection


def _project(spec, c: Cube, keep: Sequence[IVar], drop_arrays: Iterable[str] = ()) -> Formula | None:
    """Eliminate the variables outside ``keep`` and the arrays in ``drop_arrays``.

    Index literals mentioning a dropped variable are removed; reads
    ``a[j]`` with ``j`` dropped or ``a`` in ``drop_arrays`` become fresh
    element variables that are then eliminated by the element theory.
    Returns None when some element theory cannot eliminate quantifiers.
    """
    keep = set(keep)
    drop_arrays = set(drop_arrays)
    elem = spec.elem_theories
    gone: dict = {}
    opaque: dict = {}

    def abstract(t):
        if isinstance(t, Read):
            table = gone if (t.index not in keep and isinstance(t.index, IVar)) or t.array in drop_arrays else opaque
            if t not in table:
                table[t] = EVar(f"_e{len(gone) + len(opaque)}", t.sort)
            return table[t]
        return None

    kept: list = []
    by_sort: dict = {}
    for lit in c.sorted_lits:
        a = lit.atom
        if is_index_atom(a):
            if all(not isinstance(t, IVar) or t in keep for t in atom_terms(a)):
                kept.append(lit)
            continue
        new = Lit(map_atom(a, abstract), lit.positive)
        sort = atom_terms(a)[0].sort
        by_sort.setdefault(sort, []).append(new)
    gone_vars = set(gone.values())
    back = {v: r for r, v in opaque.items()}
    parts: list = []
    for sort, lits in by_sort.items():
        mentions = [l for l in lits if any(t in gone_vars for t in atom_terms(l.atom))]
        plain = [l for l in lits if l not in mentions]
        parts.extend(plain)
        if mentions:
            vs = [v for v in gone_vars if v.sort == sort and any(v in atom_terms(l.atom) for l in mentions)]
            th = elem.get(sort)
            if th is None or not th.has_qe:
                return None
            parts.append(eliminate_elem_quantifier(th, sorted(vs, key=lambda v: v.name), mentions))
    body = conj(*kept, *parts)
    return map_formula(body, lambda t: back.get(t) if isinstance(t, EVar) else None)


def _as_candidate(spec, vars_: Sequence[IVar], body: Formula, origin: str) -> Candidate | None:
    cubes = []
    for q in spec.normalize(ExistsI(tuple(vars_), body)):
        q = _drop_unused(q).canonical()
        if q not in cubes:
            cubes.append(q)
    if not cubes:
        return None
    return Candidate(tuple(cubes), origin)


def _drop_unused(c: Cube) -> Cube:
    """Drop variables that occur only in index disequalities (a weakening)."""
    def only_diseq(lit: Lit) -> bool:
        return not lit.positive and isinstance(lit.atom, Eq) and is_index_atom(lit.atom)

    mentioned = {s for lit in c.lits if not only_diseq(lit)
                 for t in atom_terms(lit.atom) for s in iter_subterms(t) if isinstance(s, IVar)}
    unused = {v for v in c.vars if v not in mentioned}
    if not unused:
        return c
    lits = frozenset(l for l in c.lits if not any(t in unused for t in atom_terms(l.atom)))
    return Cube(tuple(v for v in c.vars if v not in unused), lits)


def _maximal(engine: Engine, c: Cube, ui: Sequence[IVar]) -> bool:
    """Every index atom over ``ui`` is decided by the index literals over ``ui``."""
    ui = list(ui)
    delta = [l for l in c.index_lits if all(not isinstance(t, IVar) or t in ui for t in atom_terms(l.atom))]
    atoms = []
    for x, y in itertools.permutations(ui, 2):
        for name in engine.index.relations:
            atoms.append(rel(name, x, y))
    for x, y in itertools.combinations(ui, 2):
        atoms.append(eq(x, y))
    distinct = all(Lit(eq(x, y).atom, False) in delta for x, y in itertools.combinations(ui, 2))
    for a in atoms:
        if a in delta or ~a in delta:
            continue
        pos = engine.theory_check(delta + [a], ui, distinct)
        negv = engine.theory_check(delta + [~a], ui, distinct)
        if pos is not None and negv is not None:
            return False
    return True


def index_abstraction(spec, c: Cube, ui: Sequence[IVar], engine: Engine | None = None) -> Candidate | None:
    """``exists ui. delta_I(ui) and exists e. psi_E`` for the split ``ui`` / rest.

    Returns None unless the index literals over ``ui`` are maximal (decide
    every index atom over ``ui``) and the element theories admit the
    elimination.
    """
    engine = engine or spec.engine()
    ui = [v for v in c.vars if v in set(ui)]
    if len(ui) == len(c.vars):
        return Candidate((c,), INDEX_ABSTRACTION)
    if not _maximal(engine, c, ui):
        return None
    body = _project(spec, c, ui)
    if body is None:
        return None
    return _as_candidate(spec, ui, body, INDEX_ABSTRACTION)


def signature_abstraction(spec, c: Cube, arrays: Iterable[str]) -> Candidate:
    """Eliminate every literal that reads one of ``arrays``."""
    arrays = set(arrays)
    if not arrays:
        return Candidate((c,), SIGNATURE_ABSTRACTION)
    body = _project(spec, c, c.vars, arrays)
    if body is None:
        from .errors import UnsupportedOperation

        raise UnsupportedOperation("element theory without quantifier elimination")
    cand = _as_candidate(spec, c.vars, body, SIGNATURE_ABSTRACTION)
    return cand if cand is not None else Candidate((), SIGNATURE_ABSTRACTION)


# ---------------------------------------------------------------- Choose


def implied_by(engine: Engine, q: Cube, cubes: Sequence[Cube]) -> bool:
    """``Q -> (c1 or ... or cn)`` modulo the theories."""
    return engine.check_fixpoint(q, list(cubes))


def choose(spec, p, strategy: str = "index", engine: Engine | None = None,
           sig_arrays: Sequence[str] | None = None) -> list[Candidate]:
    """Candidates over-approximating the disjuncts of ``p``.

    ``p`` is a cube, a list of cubes or an existential formula.  Every
    returned candidate is implied by the disjunct it was derived from, is
    not equivalent to it, and no two candidates are equivalent.
    """
    engine = engine or spec.engine()
    if strategy not in ("index", "signature", "both"):
        raise ConfigError(f"unknown abstraction {strategy!r}")
    if isinstance(p, Cube):
        disjuncts = [p]
    elif isinstance(p, ExistsI):
        disjuncts = spec.normalize(p)
    else:
        disjuncts = list(p)
    out: list[Candidate] = []
    for q in disjuncts:
        if not engine.check_cube_sat(q):
            continue
        raw: list = []
        if strategy in ("index", "both"):
            n = len(q.vars)
            for size in (1, 2):
                if size >= n:
                    break
                for ui in itertools.combinations(q.vars, size):
                    cand = index_abstraction(spec, q, ui, engine)
                    if cand is not None:
                        raw.append(cand)
        if strategy in ("signature", "both"):
            arrays = sorted({r.array for r in q.reads})
            groups = [list(sig_arrays)] if sig_arrays else [[a] for a in arrays]
            for g in groups:
                if set(g) & set(arrays):
                    raw.append(signature_abstraction(spec, q, g))
        for cand in raw:
            if not cand.cubes:
                continue
            if cand.cubes == (q.canonical(),) or (len(cand.cubes) == 1 and cand.cube == q):
                continue
            if not implied_by(engine, q, cand.cubes):
                continue
            # equal to the source up to equivalence
            if all(implied_by(engine, k, [q]) for k in cand.cubes):
                continue
            if any(_equivalent(engine, cand.cubes, o.cubes) for o in out):
                continue
            out.append(cand)
    return out


def _equivalent(engine: Engine, a: Sequence[Cube], b: Sequence[Cube]) -> bool:
    return all(implied_by(engine, k, b) for k in a) and all(implied_by(engine, k, a) for k in b)


# ---------------------------------------------------------------- verification


def verify_candidate(spec, cand: Candidate, max_depth: int = DEFAULT_INV_DEPTH,
                     max_nodes: int = DEFAULT_INV_NODES, engine: Engine | None = None,
                     deadline: float | None = None) -> VerifiedInvariant | NotProved:
    """Bounded backward search from the candidate; safe means invariant."""
    res = breach(spec, list(cand.cubes), max_depth=max_depth, max_nodes=max_nodes, engine=engine,
                 deadline=deadline)
    if res.safe:
        return VerifiedInvariant(tuple(res.cubes), cand)
    return NotProved(cand, "unsafe" if res.unsafe else res.reason)


def certify_invariant(spec, cubes: Sequence[Cube], engine: Engine | None = None) -> bool:
    """Independent check that ``not (c1 or ... or cn)`` is an inductive invariant.

    (i) no cube meets the initial states; (ii) every pre-image cube of every
    cube is implied by the disjunction.
    """
    engine = engine or spec.engine()
    cubes = list(cubes)
    for c in cubes:
        if engine.check_safety(spec.init, c):
            return False
    for c in cubes:
        for t in spec.transitions:
            for p in preimage_cubes(t, c, spec.constants):
                if engine.check_cube_sat(p) and not implied_by(engine, p, cubes):
                    return False
    return True


class InvariantCache:
    """Verified invariants and refuted candidates of one system."""

    def __init__(self):
        self.verified: list[VerifiedInvariant] = []
        self.refuted: set = set()

    def cubes(self) -> list[Cube]:
        return [c for inv in self.verified for c in inv.cubes]


def breach_plus_inv(spec, u=None, max_depth: int = DEFAULT_MAX_DEPTH, max_nodes: int = DEFAULT_MAX_NODES,
                    inv_depth: int = DEFAULT_INV_DEPTH, inv_nodes: int = DEFAULT_INV_NODES,
                    strategy: str = "index", sig_arrays: Sequence[str] | None = None,
                    choose_fn: Callable[[Cube], Sequence[Candidate]] | None = None,
                    engine: Engine | None = None, use_suggested: bool = True,
                    cache: InvariantCache | None = None, deadline: float | None = None) -> ReachResult:
    """Backward reachability that adds verified invariants to the fix-point.

    For every retained node, candidates from ``choose_fn`` (default:
    :func:`choose` with ``strategy``) are verified by a bounded run; the
    cubes of each verified invariant join the accumulated set, so they
    prune later nodes.  The verdict is that of the main search.
    """
    if inv_depth <= 0 or inv_nodes <= 0:
        raise ConfigError("invariant budgets must be positive")
    inv_depth = min(inv_depth, max(1, max_depth - 1))
    engine = engine or spec.engine()
    cache = cache if cache is not None else InvariantCache()
    if choose_fn is None:
        def choose_fn(c: Cube) -> list:
            return choose(spec, c, strategy, engine, sig_arrays)

    pending: list = []
    if use_suggested:
        for s in spec.suggested:
            cubes = tuple(q.canonical() for q in spec.normalize(s))
            if cubes:
                pending.append(Candidate(cubes, USER))

    def attempt(cands: Iterable[Candidate]) -> list:
        found = []
        for cand in cands:
            key = frozenset(cand.cubes)
            if not cand.cubes or key in cache.refuted:
                continue
            known = cache.cubes()
            if known and all(implied_by(engine, k, known) for k in cand.cubes):
                continue
            r = verify_candidate(spec, cand, inv_depth, inv_nodes, engine, deadline)
            if isinstance(r, VerifiedInvariant):
                cache.verified.append(r)
                found.append(r)
            else:
                cache.refuted.add(key)
        return found

    first = [True]

    def on_retained(node) -> list:
        found = []
        if first[0]:
            first[0] = False
            found.extend(attempt(pending))
        found.extend(attempt(choose_fn(node.cube)))
        return found

    return breach(spec, u, max_depth, max_nodes, engine=engine, on_retained=on_retained, deadline=deadline)


# ---------------------------------------------------------------- SInv


@dataclass
class SInvResult:
    status: str  # "success" | "failure" | "unknown"
    cubes: list = field(default_factory=list)  # B; the invariant is its negation
    iterations: int = 0
    time: float = 0.0

    @property
    def success(self) -> bool:
        return self.status == "success"

    def invariant(self) -> list[ForallI]:
        return [ForallI(c.vars, neg(c.matrix)) for c in self.cubes]


def identity_cover(c: Cube) -> list[Cube]:
    return [c]


def index_cover(spec, engine: Engine | None = None, max_depth: int = DEFAULT_INV_DEPTH,
                max_nodes: int = DEFAULT_INV_NODES) -> Callable[[Cube], list[Cube]]:
    """Cover a cube by the first index abstraction that a bounded run proves safe.

    Cubes without such an abstraction are covered by themselves.
    """
    engine = engine or spec.engine()
    cache = InvariantCache()

    def cover(c: Cube) -> list[Cube]:
        for size in (1, 2):
            if size >= len(c.vars):
                break
            for ui in itertools.combinations(c.vars, size):
                cand = index_abstraction(spec, c, ui, engine)
                if cand is None or not cand.cubes:
                    continue
                key = frozenset(cand.cubes)
                if key in cache.refuted:
                    continue
                if any(frozenset(inv.source.cubes) == key for inv in cache.verified):
                    return list(cand.cubes)
                r = verify_candidate(spec, cand, max_depth, max_nodes, engine)
                if isinstance(r, VerifiedInvariant):
                    cache.verified.append(r)
                    return list(cand.cubes)
                cache.refuted.add(key)
        return [c]

    return cover


def sinv(spec, u=None, cover_fn: Callable[[Cube], Sequence[Cube]] = identity_cover,
         max_depth: int = DEFAULT_MAX_DEPTH, max_nodes: int = DEFAULT_MAX_NODES,
         engine: Engine | None = None) -> SInvResult:
    """Invariant synthesis dual to backward reachability.

    Each disjunct is replaced by the cubes returned by ``cover_fn``, which
    must be implied by it (checked; a violation raises ConfigError).  Fails
    as soon as a covering cube meets the initial states.
    """
    from .reachability import _as_cubes, _check_budget

    _check_budget(max_depth, max_nodes)
    start = time.perf_counter()
    engine = engine or spec.engine()

    def cover(c: Cube) -> list[Cube]:
        ks = [k.canonical() for k in cover_fn(c)]
        if not implied_by(engine, c, ks):
            raise ConfigError(f"cover of {c} is not implied by it")
        return ks

    level: list = []
    for c in _as_cubes(spec, u):
        if engine.check_cube_sat(c):
            level.extend(cover(c))
    b: list[Cube] = []
    total = len(level)
    for it in range(max_depth + 1):
        fresh = []
        for p in level:
            if engine.check_fixpoint(p, b):
                continue
            if engine.check_safety(spec.init, p):
                return SInvResult("failure", b, it, time.perf_counter() - start)
            b.append(p)
            fresh.append(p)
        if not fresh:
            return SInvResult("success", b, it, time.perf_counter() - start)
        if it == max_depth:
            break
        level = []
        for p in fresh:
            for t in spec.transitions:
                for q in preimage_cubes(t, p, spec.constants):
                    if engine.check_cube_sat(q):
                        level.extend(cover(q))
        total += len(level)
        if total > max_nodes:
            break
    return SInvResult("unknown", b, max_depth, time.perf_counter() - start)
