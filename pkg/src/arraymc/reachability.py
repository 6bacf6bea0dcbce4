"""Backward reachability by tableau expansion of pre-images."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import ConfigError, InternalError
from .logic import (
    CaseApp,
    Cube,
    ExistsI,
    IConst,
    Read,
    TransitionRule,
    conj,
    differentiate_update,
    fresh_index_vars,
    map_formula,
    substitute,
)
from .smt import Engine

DEFAULT_MAX_DEPTH = 50
DEFAULT_MAX_NODES = 20000

OPEN = "open"
CLOSED_UNSAT = "closed-unsat"
CLOSED_FIXPOINT = "closed-fixpoint"
DELETED = "deleted-subsumed"
UNSAFE = "unsafe"


@dataclass
class TableauNode:
    id: int
    cube: Cube
    parent: int | None
    label: str | None
    depth: int
    status: str = OPEN

    @property
    def retained(self) -> bool:
        return self.status in (OPEN, UNSAFE)


@dataclass(frozen=True)
class Trace:
    """Transition names from the leaf (initial side) to the root (unsafe side)."""

    transitions: tuple

    def __iter__(self):
        return iter(self.transitions)

    def __len__(self) -> int:
        return len(self.transitions)

    def __str__(self) -> str:
        return " -> ".join(self.transitions) if self.transitions else "(empty)"


@dataclass
class ReachStats:
    depth: int = 0
    nodes: int = 0
    deleted: int = 0
    smt: int = 0
    invariants: int = 0
    time: float = 0.0

    def line(self) -> str:
        return (f"d={self.depth} n={self.nodes} del={self.deleted} smt={self.smt} "
                f"inv={self.invariants} time={self.time:.3f}")


@dataclass
class ReachResult:
    verdict: str  # "safe" | "unsafe" | "unknown"
    cubes: list = field(default_factory=list)  # B on safe
    trace: Trace | None = None
    stats: ReachStats = field(default_factory=ReachStats)
    nodes: list = field(default_factory=list)
    reason: str = ""
    invariants: list = field(default_factory=list)

    @property
    def safe(self) -> bool:
        return self.verdict == "safe"

    @property
    def unsafe(self) -> bool:
        return self.verdict == "unsafe"


# ---------------------------------------------------------------- pre-image


def preimage(t: TransitionRule, k: Cube, constants: Sequence[IConst] = ()) -> ExistsI:
    """Existential formula for the states with a ``t``-successor in ``k``."""
    ren = fresh_index_vars(t.params, [v.name for v in k.vars], "x")
    guard = substitute(t.guard, ren)
    fns = {name: fn.substitute(ren) for name, fn in t.updates}

    def post(term):
        if isinstance(term, Read) and term.array in fns:
            return CaseApp(fns[term.array], term.index)
        return None

    body = map_formula(k.matrix, post)
    return ExistsI(tuple(ren.values()) + tuple(k.vars), conj(guard, body))


def preimage_cubes(t: TransitionRule, k: Cube, constants: Sequence[IConst] = ()) -> list[Cube]:
    """Primitive differentiated cubes of the pre-image, canonically renamed."""
    ren = fresh_index_vars(t.params, [v.name for v in k.vars], "x")
    fns = {name: fn.substitute(ren) for name, fn in t.updates}
    vars_ = tuple(ren.values()) + tuple(k.vars)
    out: list = []
    for c in differentiate_update(vars_, substitute(t.guard, ren), k.lits, fns, constants):
        c = c.canonical()
        if c not in out:
            out.append(c)
    return out


def _as_cubes(spec, u) -> list[Cube]:
    if u is None:
        return spec.unsafe_cubes()
    if isinstance(u, Cube):
        items = [u]
    elif isinstance(u, ExistsI):
        items = [u]
    else:
        items = list(u)
    out: list = []
    for x in items:
        cubes = spec.normalize(x.as_exists() if isinstance(x, Cube) else x)
        for c in cubes:
            c = c.canonical()
            if c not in out:
                out.append(c)
    return out


# ---------------------------------------------------------------- tableau


class Tableau:
    """Breadth-first backward search state."""

    def __init__(self, spec, engine: Engine):
        self.spec = spec
        self.engine = engine
        self.nodes: list[TableauNode] = []
        self.extra: list[Cube] = []  # cubes contributed by verified invariants
        self.processed: list[TableauNode] = []  # nodes that passed the fix-point and safety checks
        self.deleted = 0

    def add(self, cube: Cube, parent: TableauNode | None, label: str | None) -> TableauNode:
        node = TableauNode(len(self.nodes), cube, None if parent is None else parent.id, label,
                           0 if parent is None else parent.depth + 1)
        self.nodes.append(node)
        return node

    def accumulated(self) -> list[Cube]:
        """Processed retained cubes in chronological order (the current B)."""
        return self.extra + [n.cube for n in self.processed if n.retained]

    def descendants(self, node: TableauNode) -> set:
        out = {node.id}
        for n in self.nodes:
            if n.parent in out:
                out.add(n.id)
        return out

    def subsume_sweep(self, new: Sequence[TableauNode]) -> int:
        """Delete retained nodes covered by the other retained cubes."""
        count = 0
        for node in list(self.processed):
            if not node.retained or node.status == UNSAFE:
                continue
            desc = self.descendants(node)
            # new cubes with more variables than the node has index terms have
            # no instance over them and cannot contribute to covering it
            width = len(node.cube.vars) + len(self.spec.constants)
            helpers = [n.cube for n in new if n.id not in desc and n.retained
                       and (len(n.cube.vars) <= width or not self._differentiated(n))]
            if not helpers:
                continue
            others = self.extra + [n.cube for n in self.processed if n.retained and n.id not in desc]
            if self.engine.check_fixpoint(node.cube, others, require=helpers):
                node.status = DELETED
                count += 1
        self.deleted += count
        return count

    def _differentiated(self, node: TableauNode) -> bool:
        return node.cube.is_differentiated(self.spec.constants)

    def trace(self, node: TableauNode) -> Trace:
        if node.status != UNSAFE:
            raise InternalError("trace requested for a node that is not unsafe")
        labels = []
        cur: TableauNode | None = node
        while cur is not None and cur.parent is not None:
            labels.append(cur.label)
            cur = self.nodes[cur.parent]
        return Trace(tuple(labels))


def subsume_sweep(engine: Engine, cubes: Sequence[Cube]) -> tuple[list[Cube], int]:
    """Drop cubes covered by the remaining ones; returns (kept, deleted count)."""
    kept = list(cubes)
    deleted = 0
    k = 0
    while k < len(kept):
        others = kept[:k] + kept[k + 1:]
        if others and engine.check_fixpoint(kept[k], others):
            del kept[k]
            deleted += 1
        else:
            k += 1
    return kept, deleted


def extract_trace(tableau: Tableau, node: TableauNode) -> Trace:
    return tableau.trace(node)


def expand(tableau: Tableau, node: TableauNode, transitions: Iterable[TransitionRule],
           on_preimage: Callable | None = None) -> list[TableauNode]:
    """Children of ``node``, one per pre-image cube; unsatisfiable ones are closed."""
    children = []
    consts = tableau.spec.constants
    for t in transitions:
        cubes = preimage_cubes(t, node.cube, consts)
        if on_preimage is not None:
            on_preimage(t, node.cube, cubes)
        for c in cubes:
            child = tableau.add(c, node, t.name)
            if not tableau.engine.check_cube_sat(c):
                child.status = CLOSED_UNSAT
            children.append(child)
    return children


def _check_budget(max_depth: int, max_nodes: int) -> None:
    if max_depth <= 0 or max_nodes <= 0:
        raise ConfigError("search budgets must be positive")


def breach(spec, u=None, max_depth: int = DEFAULT_MAX_DEPTH, max_nodes: int = DEFAULT_MAX_NODES,
           engine: Engine | None = None, subsume: bool = True,
           on_retained: Callable | None = None, on_preimage: Callable | None = None,
           deadline: float | None = None) -> ReachResult:
    """Backward reachability from ``u`` (default: the system's unsafe formula).

    Nodes are handled breadth first.  Each node is closed if its cube is
    unsatisfiable or implied by the accumulated cubes; otherwise it is
    checked against the initial states and then expanded.  ``on_retained``
    may return extra cubes (from verified invariants) to add to the
    accumulated set.
    """
    _check_budget(max_depth, max_nodes)
    start = time.perf_counter()
    engine = engine or spec.engine()
    calls0 = engine.stats.calls
    tab = Tableau(spec, engine)
    level = [tab.add(c, None, None) for c in _as_cubes(spec, u)]
    for node in level:
        if not engine.check_cube_sat(node.cube):
            node.status = CLOSED_UNSAT
    invariants: list = []

    def result(verdict: str, **kw) -> ReachResult:
        retained = [n for n in tab.nodes if n.retained]
        stats = ReachStats(
            depth=1 + max((n.depth for n in retained), default=-1),
            nodes=sum(1 for n in retained if n.parent is not None),
            deleted=tab.deleted,
            smt=engine.stats.calls - calls0,
            invariants=len(invariants),
            time=time.perf_counter() - start,
        )
        return ReachResult(verdict, stats=stats, nodes=tab.nodes, invariants=invariants, **kw)

    while True:
        fresh = []
        for node in level:
            if node.status != OPEN:
                continue
            if deadline is not None and time.perf_counter() > deadline:
                return result("unknown", reason="time")
            if engine.check_fixpoint(node.cube, tab.accumulated()):
                node.status = CLOSED_FIXPOINT
                continue
            if engine.check_safety(spec.init, node.cube):
                node.status = UNSAFE
                return result("unsafe", trace=tab.trace(node))
            fresh.append(node)
            tab.processed.append(node)
            if on_retained is not None:
                for inv in on_retained(node):
                    invariants.append(inv)
                    tab.extra.extend(inv.cubes)
        if subsume and fresh:
            tab.subsume_sweep(fresh)
        to_expand = [n for n in fresh if n.status == OPEN]
        if not to_expand:
            return result("safe", cubes=tab.accumulated())
        if to_expand[0].depth + 1 > max_depth:
            return result("unknown", reason="depth")
        level = []
        for node in to_expand:
            level.extend(expand(tab, node, spec.transitions, on_preimage))
            if len(tab.nodes) > max_nodes:
                return result("unknown", reason="nodes")
