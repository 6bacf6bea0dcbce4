"""Brute-force semantics on finite index models.

Configurations are finite index structures together with the contents of
every array.  Everything here works by enumeration and direct evaluation and
shares nothing with the symbolic engine except the formula data types, so it
serves as ground truth in tests and in the ``--oracle-check`` mode.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .errors import ConfigError
from .logic import (
    CaseApp,
    Const,
    Cube,
    EConst,
    EVar,
    Eq,
    ExistsI,
    ForallI,
    Formula,
    IConst,
    IVar,
    Lit,
    Lt,
    Not,
    Or,
    And,
    Read,
    Rel,
    TransitionRule,
    atom_terms,
    eq,
    lt,
    neq,
)
from .theories import Enumerated, IndexStructure, Rationals


@dataclass(frozen=True)
class Configuration:
    """Finite index structure plus one value tuple per array."""

    structure: IndexStructure
    arrays: tuple  # ((name, values), ...) sorted by name

    def __init__(self, structure: IndexStructure, arrays):
        object.__setattr__(self, "structure", structure)
        items = arrays.items() if isinstance(arrays, Mapping) else arrays
        object.__setattr__(self, "arrays", tuple(sorted((k, tuple(v)) for k, v in items)))

    @property
    def size(self) -> int:
        return self.structure.size

    def values(self, array: str) -> tuple:
        for k, v in self.arrays:
            if k == array:
                return v
        raise KeyError(array)

    def restrict(self, keep: Sequence[int]) -> "Configuration":
        return Configuration(self.structure.restrict(keep), {k: tuple(v[e] for e in keep) for k, v in self.arrays})

    def permute(self, perm: Sequence[int]) -> "Configuration":
        out = {}
        for k, v in self.arrays:
            new = [None] * len(v)
            for x, val in enumerate(v):
                new[perm[x]] = val
            out[k] = tuple(new)
        return Configuration(self.structure.permute(perm), out)

    def __str__(self) -> str:
        cells = []
        for e in range(self.size):
            names = [n for n, x in self.structure.consts if x == e]
            vals = ",".join(str(v) for _, vs in self.arrays for v in [vs[e]])
            cells.append(f"{e}{'(' + '/'.join(names) + ')' if names else ''}:{vals}")
        rels = " ".join(f"{n}{args}" for n, args in sorted(self.structure.rels) if n != "<")
        return "[" + " ".join(cells) + "]" + (f" {rels}" if rels else "")


# ---------------------------------------------------------------- evaluation


def term_value(cfg: Configuration, t, env: Mapping):
    if isinstance(t, (IVar, EVar)):
        return env[t]
    if isinstance(t, IConst):
        return cfg.structure.const(t.name)
    if isinstance(t, EConst):
        return t.value
    if isinstance(t, Read):
        return cfg.values(t.array)[term_value(cfg, t.index, env)]
    if isinstance(t, CaseApp):
        at = term_value(cfg, t.at, env)
        inner = dict(env)
        inner[t.fn.param] = at
        for guard, value in t.fn.effective_branches():
            if eval_qf(cfg, guard, inner):
                return term_value(cfg, value, inner)
        raise ValueError(f"case function {t.fn.name} has no applicable branch")
    raise TypeError(t)


def eval_lit(cfg: Configuration, lit: Lit, env: Mapping) -> bool:
    a = lit.atom
    if isinstance(a, Rel):
        v = cfg.structure.holds(a.name, tuple(term_value(cfg, x, env) for x in a.args))
    elif isinstance(a, Eq):
        v = term_value(cfg, a.lhs, env) == term_value(cfg, a.rhs, env)
    elif isinstance(a, Lt):
        v = term_value(cfg, a.lhs, env) < term_value(cfg, a.rhs, env)
    else:
        raise TypeError(a)
    return v == lit.positive


def eval_qf(cfg: Configuration, f: Formula, env: Mapping) -> bool:
    if isinstance(f, Lit):
        return eval_lit(cfg, f, env)
    if isinstance(f, And):
        return all(eval_qf(cfg, g, env) for g in f.args)
    if isinstance(f, Or):
        return any(eval_qf(cfg, g, env) for g in f.args)
    if isinstance(f, Not):
        return not eval_qf(cfg, f.arg, env)
    if isinstance(f, Const):
        return f.value
    raise TypeError(f)


def eval_formula(cfg: Configuration, f, env: Mapping | None = None) -> bool:
    """Truth of an existential/universal index formula, cube or QF formula."""
    env = dict(env or {})
    if isinstance(f, Cube):
        return eval_cube(cfg, f, env)
    if isinstance(f, ExistsI):
        return any(eval_qf(cfg, f.matrix, {**env, **dict(zip(f.vars, combo))})
                   for combo in itertools.product(range(cfg.size), repeat=len(f.vars)))
    if isinstance(f, ForallI):
        return all(eval_qf(cfg, f.matrix, {**env, **dict(zip(f.vars, combo))})
                   for combo in itertools.product(range(cfg.size), repeat=len(f.vars)))
    if isinstance(f, (list, tuple)):
        return any(eval_formula(cfg, g, env) for g in f)
    return eval_qf(cfg, f, env)


def eval_cube(cfg: Configuration, c: Cube, env: Mapping | None = None) -> bool:
    """Cube truth by backtracking over its variables, checking literals early."""
    env = dict(env or {})
    vars_ = [v for v in c.vars if v not in env]
    pos = {v: k for k, v in enumerate(vars_)}
    stage: list = [[] for _ in range(len(vars_) + 1)]
    for lit in c.lits:
        k = 0
        for t in atom_terms(lit.atom):
            for s in (t, getattr(t, "index", None)):
                if isinstance(s, IVar) and s in pos:
                    k = max(k, pos[s] + 1)
        stage[k].append(lit)

    def rec(k: int) -> bool:
        if not all(eval_lit(cfg, lit, env) for lit in stage[k]):
            return False
        if k == len(vars_):
            return True
        v = vars_[k]
        for e in range(cfg.size):
            env[v] = e
            if rec(k + 1):
                return True
        del env[v]
        return False

    return rec(0)


def eval_sentence(cfg: Configuration, s, elem_domains: Mapping | None = None) -> bool:
    """Truth of an existential-universal sentence in a configuration."""
    elem_choices = []
    for v in s.elem_vars:
        dom = (elem_domains or {}).get(v.sort)
        if dom is None:
            raise ConfigError(f"no finite domain for element variable {v}")
        elem_choices.append(dom)
    for combo in itertools.product(range(cfg.size), repeat=len(s.index_vars)):
        env = dict(zip(s.index_vars, combo))
        for ecombo in itertools.product(*elem_choices):
            env2 = {**env, **dict(zip(s.elem_vars, ecombo))}
            if eval_qf(cfg, s.body, env2) and all(eval_formula(cfg, b, env2) for b in s.blocks):
                return True
    return False


# ---------------------------------------------------------------- enumeration


def value_carrier(spec, sort, size: int, grid: Sequence | None = None) -> list:
    """Finite set of element values used for ``sort`` at a given size."""
    th = spec.elem_theories[sort]
    if isinstance(th, Enumerated):
        return list(th.values)
    if grid is not None:
        if len(grid) < size:
            raise ConfigError(f"grid of {len(grid)} points too small for {size} indexes")
        return sorted(Fraction(g) for g in grid)
    nums = spec.numerals(sort)
    if not nums:
        return [Fraction(k) for k in range(size)]
    pts = set(nums)
    for k in range(1, size + 1):
        pts.add(nums[0] - k)
        pts.add(nums[-1] + k)
    for a, b in zip(nums, nums[1:]):
        for k in range(1, size + 1):
            pts.add(a + (b - a) * Fraction(k, size + 1))
    return sorted(pts)


def _rational_key(vals: Sequence, nums: Sequence) -> tuple:
    universe = sorted(set(vals) | set(nums))
    return tuple(universe.index(v) for v in vals), tuple(u in nums for u in universe)


def canonical_key(spec, cfg: Configuration, autos: Sequence | None = None) -> tuple:
    """Key identifying a configuration up to equivalence (iso on supports)."""
    th = spec.index_theory
    autos = autos if autos is not None else th.automorphisms(cfg.structure)
    sorts = spec.array_sorts
    nums = {s: spec.numerals(s) for s in set(sorts.values()) if isinstance(spec.elem_theories[s], Rationals)}
    best = None
    for perm in autos:
        p = cfg.permute(perm)
        parts = []
        by_sort: dict = {}
        for name, vals in p.arrays:
            s = sorts[name]
            if s in nums:
                by_sort.setdefault(s, []).extend(vals)
            else:
                parts.append(vals)
        for s in sorted(by_sort, key=lambda s: s.name):
            parts.append(_rational_key(by_sort[s], nums[s]))
        k = (p.structure.key(), tuple(parts))
        if best is None or k < best:
            best = k
    return best


def enumerate_configurations(spec, max_size: int, exact: bool = False, up_to_iso: bool = True,
                             grid: Sequence | None = None) -> Iterator[Configuration]:
    """Configurations with ``1..max_size`` indexes (or exactly ``max_size``)."""
    if max_size <= 0:
        return
    sizes = [max_size] if exact else range(1, max_size + 1)
    names = [n for n, _ in spec.arrays]
    sorts = spec.array_sorts
    for n in sizes:
        carriers = [value_carrier(spec, sorts[a], n, grid) for a in names]
        for st in spec.index_theory.structures(n):
            autos = spec.index_theory.automorphisms(st) if up_to_iso else None
            seen: set = set()
            for combo in itertools.product(*(itertools.product(c, repeat=n) for c in carriers)):
                cfg = Configuration(st, dict(zip(names, combo)))
                if up_to_iso:
                    key = canonical_key(spec, cfg, autos)
                    if key in seen:
                        continue
                    seen.add(key)
                yield cfg


# ---------------------------------------------------------------- transitions


def step(cfg: Configuration, t: TransitionRule) -> list[Configuration]:
    """All successors of ``cfg`` under ``t`` (one per satisfying guard witness)."""
    out = []
    updates = t.update_map
    for combo in itertools.product(range(cfg.size), repeat=len(t.params)):
        env = dict(zip(t.params, combo))
        if not eval_qf(cfg, t.guard, env):
            continue
        arrays = {}
        for name, vals in cfg.arrays:
            fn = updates.get(name)
            if fn is None:
                arrays[name] = vals
            else:
                arrays[name] = tuple(term_value(cfg, CaseApp(fn, fn.param), {**env, fn.param: e})
                                     for e in range(cfg.size))
        out.append(Configuration(cfg.structure, arrays))
    return out


def oracle_preimage(spec, t: TransitionRule, formula, max_size: int) -> set:
    """Enumerated configurations with a ``t``-successor satisfying ``formula``."""
    return {cfg for cfg in enumerate_configurations(spec, max_size)
            if any(eval_formula(s, formula) for s in step(cfg, t))}


# ---------------------------------------------------------------- embeddings


def _elem_pairs_ok(spec, pairs_by_sort: Mapping) -> bool:
    for sort, pairs in pairs_by_sort.items():
        th = spec.elem_theories[sort]
        if isinstance(th, Enumerated):
            if any(v != w for v, w in pairs):
                return False
            continue
        pairs = set(pairs) | {(c, c) for c in spec.numerals(sort)}
        for (v1, w1), (v2, w2) in itertools.combinations(pairs, 2):
            if (v1 < v2) != (w1 < w2) or (v1 == v2) != (w1 == w2) or (v1 > v2) != (w1 > w2):
                return False
    return True


def find_embedding(spec, s: Configuration, t: Configuration) -> tuple | None:
    """An index map witnessing ``s <= t``, or None."""
    if s.size > t.size:
        return None
    ss, ts = s.structure, t.structure
    fixed = {e: t.structure.const(n) for n, e in ss.consts}
    rel_names = list(spec.index_theory.relations)
    sorts = spec.array_sorts
    order = sorted(range(s.size), key=lambda e: e not in fixed)
    mu: dict = {}

    def consistent(x: int) -> bool:
        mx = mu[x]
        for y, my in mu.items():
            for r in rel_names:
                if ss.holds(r, (x, y)) != ts.holds(r, (mx, my)):
                    return False
                if ss.holds(r, (y, x)) != ts.holds(r, (my, mx)):
                    return False
        pairs: dict = {}
        for name, vals in s.arrays:
            tv = t.values(name)
            for y in mu:
                pairs.setdefault(sorts[name], []).append((vals[y], tv[mu[y]]))
        return _elem_pairs_ok(spec, pairs)

    def rec(k: int) -> bool:
        if k == len(order):
            return True
        x = order[k]
        cands = [fixed[x]] if x in fixed else [e for e in range(t.size) if e not in mu.values() and e not in fixed.values()]
        for e in cands:
            if e in mu.values():
                continue
            mu[x] = e
            if consistent(x) and rec(k + 1):
                return True
            del mu[x]
        return False

    return tuple(mu[x] for x in range(s.size)) if rec(0) else None


def config_leq(spec, s: Configuration, t: Configuration) -> bool:
    return find_embedding(spec, s, t) is not None


def config_equiv(spec, s: Configuration, t: Configuration) -> bool:
    return s.size == t.size and config_leq(spec, s, t) and config_leq(spec, t, s)


# ---------------------------------------------------------------- diagrams and bases


def diagram_formula(spec, cfg: Configuration) -> Cube:
    """Cube whose models are exactly the configurations above ``cfg``."""
    const_of = {e: IConst(n) for n, e in cfg.structure.consts}
    names = iter(range(1, cfg.size + 1))
    terms = [const_of.get(e) or IVar(f"i{next(names)}") for e in range(cfg.size)]
    vars_ = tuple(t for t in terms if isinstance(t, IVar))
    lits: set = set()
    for x, y in itertools.combinations(range(cfg.size), 2):
        if isinstance(terms[x], IVar) or isinstance(terms[y], IVar):
            lits.add(neq(terms[x], terms[y]))
    for r in spec.index_theory.relations:
        for x, y in itertools.product(range(cfg.size), repeat=2):
            if x == y:
                continue
            lit = Lit(Rel(r, (terms[x], terms[y])), cfg.structure.holds(r, (x, y)))
            lits.add(lit)
    sorts = spec.array_sorts
    rat_reads: dict = {}
    for name, vals in cfg.arrays:
        sort = sorts[name]
        th = spec.elem_theories[sort]
        for e, v in enumerate(vals):
            r = Read(name, terms[e], sort)
            if isinstance(th, Enumerated):
                lits.add(eq(r, EConst(v, sort)))
            else:
                rat_reads.setdefault(sort, []).append((r, v))
    for sort, items in rat_reads.items():
        items = items + [(EConst(c, sort), c) for c in spec.numerals(sort)]
        for (r1, v1), (r2, v2) in itertools.combinations(items, 2):
            if isinstance(r1, EConst) and isinstance(r2, EConst):
                continue
            if v1 == v2:
                lits.add(eq(r1, r2))
            elif v1 < v2:
                lits.add(lt(r1, r2))
            else:
                lits.add(lt(r2, r1))
    return Cube(vars_, frozenset(lits))


def proper_subconfigurations(cfg: Configuration) -> Iterator[Configuration]:
    const_elems = sorted({e for _, e in cfg.structure.consts})
    others = [e for e in range(cfg.size) if e not in const_elems]
    for k in range(len(others)):
        for keep in itertools.combinations(others, k):
            dom = sorted(const_elems + list(keep))
            if dom:
                yield cfg.restrict(dom)


def basis_of(spec, formula, max_size: int) -> list[Configuration]:
    """Minimal satisfying configurations (one per equivalence class)."""
    out = []
    for cfg in enumerate_configurations(spec, max_size):
        if eval_formula(cfg, formula) and not any(eval_formula(sub, formula) for sub in proper_subconfigurations(cfg)):
            out.append(cfg)
    if not out:
        warnings.warn("no satisfying configuration within the size bound", stacklevel=2)
    return out


def covers_check(spec, k, l, bound: int, engine=None) -> bool:
    """``k`` covers ``l``: ``l`` implies ``k`` and every basis element of ``k``
    lies below some basis element of ``l`` (the latter within ``bound``)."""
    engine = engine or spec.engine()
    kc = _cubes(spec, k)
    lc = _cubes(spec, l)
    if not engine.implies(lc, kc):
        return False
    lb = basis_of(spec, l, bound)
    return all(any(config_leq(spec, b, b2) for b2 in lb) for b in basis_of(spec, k, bound))


def _cubes(spec, f) -> list[Cube]:
    if isinstance(f, Cube):
        return [f]
    if isinstance(f, ExistsI):
        return spec.normalize(f)
    out = []
    for g in f:
        out.extend(_cubes(spec, g))
    return out


# ---------------------------------------------------------------- runs


def initial_configurations(spec, max_size: int) -> list[Configuration]:
    return [cfg for cfg in enumerate_configurations(spec, max_size)
            if all(eval_formula(cfg, b) for b in spec.init)]


def replay(trace: Sequence[str], spec, max_size: int) -> list[Configuration] | None:
    """A concrete run following ``trace`` from an initial to an unsafe configuration."""
    for n in range(1, max_size + 1):
        for init in initial_configurations_exact(spec, n):
            frontier = [[init]]
            for name in trace:
                t = spec.transition(name)
                nxt = []
                seen = set()
                for path in frontier:
                    for succ in step(path[-1], t):
                        if succ not in seen:
                            seen.add(succ)
                            nxt.append(path + [succ])
                frontier = nxt
                if not frontier:
                    break
            for path in frontier:
                if any(eval_formula(path[-1], u) for u in spec.unsafe):
                    return path
    return None


def initial_configurations_exact(spec, n: int) -> list[Configuration]:
    return [cfg for cfg in enumerate_configurations(spec, n, exact=True)
            if all(eval_formula(cfg, b) for b in spec.init)]


def forward_search(spec, depth: int, max_size: int) -> list[Configuration] | None:
    """Breadth-first search for an unsafe configuration; returns a run or None."""
    for n in range(1, max_size + 1):
        start = initial_configurations_exact(spec, n)
        parent: dict = {c: None for c in start}
        frontier = list(start)
        for _ in range(depth + 1):
            for cfg in frontier:
                if any(eval_formula(cfg, u) for u in spec.unsafe):
                    run = [cfg]
                    while parent[run[-1]] is not None:
                        run.append(parent[run[-1]])
                    return run[::-1]
            nxt = []
            for cfg in frontier:
                for t in spec.transitions:
                    for succ in step(cfg, t):
                        if succ not in parent:
                            parent[succ] = cfg
                            nxt.append(succ)
            frontier = nxt
    return None
