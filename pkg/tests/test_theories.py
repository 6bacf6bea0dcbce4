from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arraymc.errors import SpecError, UnsupportedOperation
from arraymc.logic import (
    EConst,
    Eq,
    EVar,
    IConst,
    IVar,
    Lit,
    Lt,
    Rel,
    Sort,
    eq,
    le,
    lt,
    neq,
    rel,
)
from arraymc.theories import (
    BooleanTheory,
    ElemTheory,
    Enumerated,
    IndexTheory,
    Rationals,
    eliminate_elem_quantifier,
    enumerate_arrangements,
    representative_terms,
    solve_elem_conjunction,
    solve_index_conjunction,
)

I1, I2, I3, I4 = (IVar(f"i{k}") for k in range(1, 5))
EQ = IndexTheory("equality")
LO = IndexTheory("linear-order")
SUCC = IndexTheory("successor")
SUCC_O = IndexTheory("successor", ("o", "o'"))
NUM = Sort("num")
STATE = Sort("state")
Q = Rationals(NUM)
E4 = Enumerated(STATE, ("1", "2", "3", "4"))


def n(v):
    return EConst(Fraction(v), NUM)


def s(v):
    return EConst(v, STATE)


class TestRepresentativeTerms:
    def test_relational_theories_return_the_variables(self):
        assert representative_terms(EQ, [I1, I2]) == [I1, I2]
        assert representative_terms(LO, [I1]) == [I1]
        assert representative_terms(SUCC, [I1, I2, I3]) == [I1, I2, I3]

    def test_successor_constants_are_added(self):
        assert representative_terms(SUCC_O, [I1]) == [I1, IConst("o"), IConst("o'")]


class TestIndexSolving:
    def test_order_antisymmetry(self):
        assert solve_index_conjunction(LO, [rel("<", I1, I2), rel("<", I2, I1)]) is None

    def test_self_disequality(self):
        assert solve_index_conjunction(EQ, [neq(I1, I1)]) is None

    def test_chain(self):
        m = solve_index_conjunction(LO, [rel("<", I1, I2), rel("<", I2, I3), neq(I1, I3)])
        assert m is not None
        assert m.structure.size == 3
        a = m.assignment
        assert m.structure.holds("<", (a[I1], a[I2])) and m.structure.holds("<", (a[I2], a[I3]))

    def test_successor_is_functional_and_injective(self):
        assert solve_index_conjunction(SUCC, [rel("S", I1, I2), rel("S", I1, I3), neq(I2, I3)]) is None
        assert solve_index_conjunction(SUCC, [rel("S", I1, I3), rel("S", I2, I3), neq(I1, I2)]) is None

    def test_successor_origin_has_no_predecessor(self):
        assert solve_index_conjunction(SUCC_O, [rel("S", I1, IConst("o"))]) is None
        assert solve_index_conjunction(SUCC_O, [rel("S", IConst("o"), I1), neq(I1, IConst("o'"))]) is None

    def test_foreign_symbol_rejected(self):
        with pytest.raises(SpecError):
            solve_index_conjunction(EQ, [Lit(Lt(I1, I2))])

    def test_bad_theory_name(self):
        with pytest.raises(SpecError):
            IndexTheory("trees")


class TestElemSolving:
    def test_enumerated_clash(self):
        e = EVar("e", STATE)
        assert solve_elem_conjunction(E4, [eq(e, s("1")), eq(e, s("3"))]) is None

    def test_rational_cycle(self):
        d1, d2 = EVar("d1", NUM), EVar("d2", NUM)
        assert solve_elem_conjunction(Q, [lt(d1, d2), lt(d2, d1)]) is None

    def test_rational_antisymmetry(self):
        d1, d2 = EVar("d1", NUM), EVar("d2", NUM)
        assert solve_elem_conjunction(Q, [le(d1, d2), le(d2, d1), neq(d1, d2)]) is None

    def test_rational_model(self):
        d1, d2 = EVar("d1", NUM), EVar("d2", NUM)
        m = solve_elem_conjunction(Q, [lt(d1, d2), lt(d2, n(3)), neq(d1, n(0))])
        assert m[d1] < m[d2] < 3 and m[d1] != 0

    def test_unknown_constant(self):
        with pytest.raises(SpecError):
            solve_elem_conjunction(E4, [eq(EVar("e", STATE), s("7"))])

    def test_boolean_is_two_valued(self):
        flag = Sort("flag")
        b = BooleanTheory(flag)
        x, y, z = (EVar(v, flag) for v in "xyz")
        assert solve_elem_conjunction(b, [neq(x, y), neq(y, z), neq(x, z)]) is None


class TestQuantifierElimination:
    def test_enumerated_substitution(self):
        e, d = EVar("e", STATE), EVar("d", STATE)
        assert eliminate_elem_quantifier(E4, [d], [eq(e, d), neq(d, s("1"))]) == neq(e, s("1"))

    def test_density(self):
        d, d1, d2 = EVar("d", NUM), EVar("d1", NUM), EVar("d2", NUM)
        assert eliminate_elem_quantifier(Q, [d], [lt(d1, d), lt(d, d2)]) == lt(d1, d2)

    def test_no_least_element(self):
        d, d1 = EVar("d", NUM), EVar("d1", NUM)
        assert str(eliminate_elem_quantifier(Q, [d], [lt(d, d1)])) == "true"

    def test_theory_without_qe(self):
        class NoQE(ElemTheory):
            has_qe = False

        with pytest.raises(UnsupportedOperation):
            eliminate_elem_quantifier(NoQE(NUM), [], [])


class TestArrangements:
    @pytest.mark.parametrize("k, bell", [(1, 1), (2, 2), (3, 5), (4, 15)])
    def test_bell_numbers(self, k, bell):
        arrs = enumerate_arrangements([I1, I2, I3, I4][:k])
        assert len(arrs) == bell
        assert len({frozenset(a.blocks) for a in arrs}) == bell

    def test_blocks_partition_the_variables(self):
        for arr in enumerate_arrangements([I1, I2, I3]):
            items = [v for b in arr.blocks for v in b]
            assert sorted(items, key=str) == [I1, I2, I3]


# -------------------------------------------------------------- properties


def _holds(structure, assignment, lit: Lit) -> bool:
    a = lit.atom

    def val(t):
        return structure.const(t.name) if isinstance(t, IConst) else assignment[t]

    if isinstance(a, Eq):
        v = val(a.lhs) == val(a.rhs)
    else:
        v = structure.holds(a.name, tuple(val(t) for t in a.args))
    return v == lit.positive


def _brute_force(th: IndexTheory, vars_, lits) -> bool:
    for size in range(1, len(vars_) + len(th.constants) + 1):
        for structure in th.structures(size):
            for combo in itertools.product(range(size), repeat=len(vars_)):
                if all(_holds(structure, dict(zip(vars_, combo)), lit) for lit in lits):
                    return True
    return False


@st.composite
def index_problems(draw):
    th = draw(st.sampled_from([EQ, LO, SUCC, SUCC_O]))
    vars_ = [I1, I2, I3, I4][: draw(st.integers(1, 4))]
    terms = vars_ + list(th.const_terms)
    lits = []
    for _ in range(draw(st.integers(1, 8))):
        x, y = draw(st.sampled_from(terms)), draw(st.sampled_from(terms))
        if th.relations and draw(st.booleans()):
            atom = Rel(next(iter(th.relations)), (x, y))
        else:
            atom = Eq(x, y) if str(x) <= str(y) else Eq(y, x)
        lits.append(Lit(atom, draw(st.booleans())))
    return th, vars_, lits


@settings(max_examples=300, deadline=None)
@given(index_problems())
def test_index_solver_matches_enumeration(problem):
    th, vars_, lits = problem
    model = solve_index_conjunction(th, lits)
    assert (model is not None) == _brute_force(th, vars_, lits)
    if model is not None:
        assert th.is_model(model.structure)
        assert all(_holds(model.structure, model.assignment, lit) for lit in lits)


GRID = [Fraction(k) for k in range(5)]
D, D1, D2 = EVar("d", NUM), EVar("d1", NUM), EVar("d2", NUM)


def _eval_num(lit: Lit, env) -> bool:
    a = lit.atom

    def val(t):
        return t.value if isinstance(t, EConst) else env[t]

    v = val(a.lhs) == val(a.rhs) if isinstance(a, Eq) else val(a.lhs) < val(a.rhs)
    return v == lit.positive


def _eval_formula(f, env) -> bool:
    from arraymc.logic import And, Const, Not, Or

    if isinstance(f, Lit):
        return _eval_num(f, env)
    if isinstance(f, Const):
        return f.value
    if isinstance(f, And):
        return all(_eval_formula(g, env) for g in f.args)
    if isinstance(f, Or):
        return any(_eval_formula(g, env) for g in f.args)
    if isinstance(f, Not):
        return not _eval_formula(f.arg, env)
    raise AssertionError(f)


@st.composite
def rational_conjunctions(draw):
    terms = [D, D1, D2, n(1), n(3)]
    lits = []
    for _ in range(draw(st.integers(1, 4))):
        x = D if draw(st.booleans()) else draw(st.sampled_from(terms))
        y = draw(st.sampled_from([t for t in terms if t != x]))
        if isinstance(x, EConst) and isinstance(y, EConst):
            continue
        kind = draw(st.sampled_from(["lt", "le", "eq", "ne"]))
        lits.append({"lt": lt, "le": le, "eq": eq, "ne": neq}[kind](x, y))
    return lits


@settings(max_examples=200, deadline=None)
@given(rational_conjunctions())
def test_rational_qe_on_grid(psi):
    from arraymc.logic import conj

    psi = [lit for p in psi for lit in (p.args if hasattr(p, "args") else [p])]
    result = eliminate_elem_quantifier(Q, [D], psi)
    assert D not in {t for lit in _lits(result) for t in (lit.atom.lhs, lit.atom.rhs)}
    for v1, v2 in itertools.product(GRID, repeat=2):
        env = {D1: v1, D2: v2}
        # the values mentioned plus midpoints and both ends decide an order-only existential
        pts = sorted({v1, v2, Fraction(1), Fraction(3)})
        cands = pts + [(p + q) / 2 for p, q in zip(pts, pts[1:])] + [pts[0] - 1, pts[-1] + 1]
        expected = any(_eval_formula(conj(*psi), {**env, D: w}) for w in cands)
        assert _eval_formula(result, env) == expected


def _lits(f):
    from arraymc.logic import iter_literals

    return list(iter_literals(f))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["e", "d", "f"]), st.sampled_from(["e", "d", "f", "1", "2"]),
                          st.booleans()), min_size=1, max_size=4))
def test_enumerated_qe_exhaustive(raw):
    th = Enumerated(STATE, ("1", "2", "3"))
    terms = {"e": EVar("e", STATE), "d": EVar("d", STATE), "f": EVar("f", STATE), "1": s("1"), "2": s("2")}
    psi = [Lit(Eq(terms[x], terms[y]), pos) for x, y, pos in raw if x != y]
    result = eliminate_elem_quantifier(th, [terms["d"]], psi)

    def ev(f, env):
        from arraymc.logic import And, Const, Not, Or

        if isinstance(f, Lit):
            val = {**env, **{s(v): v for v in th.values}}
            return (val[f.atom.lhs] == val[f.atom.rhs]) == f.positive
        if isinstance(f, Const):
            return f.value
        if isinstance(f, And):
            return all(ev(g, env) for g in f.args)
        if isinstance(f, Or):
            return any(ev(g, env) for g in f.args)
        return not ev(f.arg, env)

    for ve, vf in itertools.product(th.values, repeat=2):
        env = {terms["e"]: ve, terms["f"]: vf}
        expected = any(all(ev(lit, {**env, terms["d"]: vd}) for lit in psi) for vd in th.values)
        assert ev(result, env) == expected
