from __future__ import annotations

import itertools
from fractions import Fraction

import pytest

from arraymc import oracle
from arraymc.oracle import Configuration, config_equiv, config_leq
from arraymc.theories import IndexStructure

from conftest import corpus, cube, exists


def mesi_cfg(*values):
    return Configuration(IndexStructure(len(values)), {"a": tuple(values)})


class TestEnumeration:
    def test_mesi_counts(self, mesi):
        assert len(list(oracle.enumerate_configurations(mesi, 1))) == 4
        assert len(list(oracle.enumerate_configurations(mesi, 2, exact=True, up_to_iso=False))) == 16
        assert len(list(oracle.enumerate_configurations(mesi, 2, exact=True))) == 10

    def test_size_zero(self, mesi):
        assert list(oracle.enumerate_configurations(mesi, 0)) == []

    def test_rational_grid_has_enough_points(self, ins_sort):
        carrier = oracle.value_carrier(ins_sort, ins_sort.array_sorts["b"], 3)
        assert len(carrier) >= 3

    def test_explicit_grid(self, ins_sort):
        grid = [Fraction(k) for k in range(7)]
        assert oracle.value_carrier(ins_sort, ins_sort.array_sorts["b"], 3, grid) == grid


class TestEvaluation:
    def test_all_invalid(self, mesi):
        cfg = mesi_cfg("4", "4", "4")
        assert all(oracle.eval_formula(cfg, b) for b in mesi.init)
        assert not oracle.eval_formula(cfg, mesi.unsafe[0])

    def test_two_modified(self, mesi):
        assert oracle.eval_formula(mesi_cfg("1", "1", "4"), mesi.unsafe[0])

    def test_singleton_universal(self, mesi):
        assert oracle.eval_formula(mesi_cfg("4"), mesi.init[0])
        assert not oracle.eval_formula(mesi_cfg("3"), mesi.init[0])

    def test_cube_and_formula_agree(self, mesi):
        for u in mesi.unsafe:
            cubes = mesi.normalize(u)
            for cfg in oracle.enumerate_configurations(mesi, 3):
                assert oracle.eval_formula(cfg, u) == any(oracle.eval_cube(cfg, q) for q in cubes)


class TestStep:
    def test_t3_makes_everything_shared(self, mesi):
        t3 = mesi.transition("t3")
        for cfg in oracle.enumerate_configurations(mesi, 3):
            succs = oracle.step(cfg, t3)
            if "4" in cfg.values("a"):
                assert succs and all(set(s.values("a")) == {"3"} for s in succs)
            else:
                assert succs == []

    def test_swap(self, ins_sort):
        t = ins_sort.transition("swap")
        st = IndexStructure(3, frozenset({("S", (0, 1)), ("S", (1, 2))}), (("0", 0),))
        cfg = Configuration(st, {"a": ("true", "true", "false"), "b": (Fraction(0), Fraction(2), Fraction(1))})
        succs = oracle.step(cfg, t)
        assert len(succs) == 1
        assert succs[0].values("b") == (Fraction(0), Fraction(1), Fraction(2))
        assert succs[0].values("a") == ("true", "true", "true")


class TestPreimage:
    def test_unsatisfiable_target(self, mesi):
        f = exists(mesi, "i", "a[i] = 1 and a[i] = 2")
        assert oracle.oracle_preimage(mesi, mesi.transition("t1"), f, 2) == set()

    def test_t4_preimage_of_unsafe(self, mesi):
        from arraymc.reachability import preimage_cubes

        t4 = mesi.transition("t4")
        symbolic = [q for u in mesi.unsafe_cubes() for q in preimage_cubes(t4, u)]
        semantic = oracle.oracle_preimage(mesi, t4, mesi.unsafe[0], 3)
        for cfg in oracle.enumerate_configurations(mesi, 3):
            assert (cfg in semantic) == any(oracle.eval_cube(cfg, q) for q in symbolic)


class TestEmbeddings:
    def test_reflexive(self, mesi):
        cfg = mesi_cfg("1", "3")
        assert config_leq(mesi, cfg, cfg)

    def test_subconfiguration(self, mesi):
        cfg = mesi_cfg("1", "3", "2")
        assert config_leq(mesi, cfg.restrict([0, 2]), cfg)

    def test_values_must_match(self, mesi):
        assert not config_leq(mesi, mesi_cfg("1", "2"), mesi_cfg("1", "1"))

    def test_equivalence_is_permutation_invariant(self, mesi):
        assert config_equiv(mesi, mesi_cfg("1", "3"), mesi_cfg("3", "1"))
        assert not config_equiv(mesi, mesi_cfg("1", "3"), mesi_cfg("1", "3", "4"))

    def test_rationals_compare_by_order(self, ins_sort):
        st = IndexStructure(2, frozenset(), (("0", 0),))
        s = Configuration(st, {"a": ("false", "true"), "b": (Fraction(0), Fraction(1))})
        t = Configuration(st, {"a": ("false", "true"), "b": (Fraction(-5), Fraction(7))})
        u = Configuration(st, {"a": ("false", "true"), "b": (Fraction(1), Fraction(0))})
        assert config_leq(ins_sort, s, t)
        assert not config_leq(ins_sort, s, u)


class TestDiagrams:
    def test_single_cell(self, mesi):
        assert oracle.diagram_formula(mesi, mesi_cfg("4")) == cube(mesi, "i1", "a[i1] = 4")

    def test_two_cells(self, mesi):
        assert oracle.diagram_formula(mesi, mesi_cfg("1", "3")) == cube(mesi, "i1 i2",
                                                                        "i1 != i2 and a[i1] = 1 and a[i2] = 3")

    def test_rational_order_literal(self, ins_sort):
        st = IndexStructure(2, frozenset({("S", (0, 1))}), (("0", 0),))
        cfg = Configuration(st, {"a": ("false", "true"), "b": (Fraction(0), Fraction(1))})
        d = oracle.diagram_formula(ins_sort, cfg)
        assert any("<" in str(lit) and "b[" in str(lit) for lit in d.lits)
        for t in oracle.enumerate_configurations(ins_sort, 3):
            assert oracle.eval_cube(t, d) == config_leq(ins_sort, cfg, t)


class TestBases:
    def test_single_cell_basis(self, mesi):
        basis = oracle.basis_of(mesi, exists(mesi, "i", "a[i] = 1"), 3)
        assert basis == [mesi_cfg("1")]

    def test_unsafe_basis(self, mesi):
        basis = oracle.basis_of(mesi, mesi.unsafe[0], 3)
        assert sorted(tuple(sorted(b.values("a"))) for b in basis) == [("1", "1"), ("1", "3")]

    def test_unsatisfiable(self, mesi):
        with pytest.warns(UserWarning):
            assert oracle.basis_of(mesi, exists(mesi, "i", "a[i] = 1 and a[i] = 2"), 2) == []


class TestCovers:
    def test_reflexive(self, mesi):
        f = exists(mesi, "i", "a[i] = 1")
        assert oracle.covers_check(mesi, f, f, 3)

    def test_index_abstraction_covers(self, mesi):
        k = exists(mesi, "i", "a[i] = 1")
        l = exists(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 3")
        assert oracle.covers_check(mesi, k, l, 3)

    def test_unrelated_disjunct_breaks_cover(self, mesi):
        l = exists(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 3")
        k = [exists(mesi, "i", "a[i] = 1"), exists(mesi, "i", "a[i] = 2")]
        assert not oracle.covers_check(mesi, k, l, 3)

    def test_not_implied(self, mesi):
        assert not oracle.covers_check(mesi, exists(mesi, "i", "a[i] = 2"), exists(mesi, "i", "a[i] = 1"), 3)


class TestReplay:
    def test_empty_trace_when_init_meets_unsafe(self, mesi):
        from dataclasses import replace

        from conftest import exists as ex

        bad = replace(mesi, unsafe=(ex(mesi, "i", "a[i] = 4"),))
        run = oracle.replay([], bad, 1)
        assert run is not None and len(run) == 1

    def test_buggy_trace(self):
        spec = corpus("mesi_buggy")
        run = oracle.replay(["t1", "t4", "t1", "t4"], spec, 2)
        assert run is not None and len(run) == 5

    def test_bogus_trace(self, mesi):
        assert oracle.replay(["t1", "t4", "t1", "t4"], mesi, 3) is None

    def test_forward_search_on_safe_system(self, mesi):
        assert oracle.forward_search(mesi, 6, 3) is None

    def test_forward_search_finds_bug(self):
        run = oracle.forward_search(corpus("mesi_buggy"), 6, 2)
        assert run is not None
        assert any(oracle.eval_formula(run[-1], u) for u in corpus("mesi_buggy").unsafe)


def test_canonical_key_identifies_isomorphic_configurations(mesi):
    for values in itertools.product("1234", repeat=3):
        cfg = mesi_cfg(*values)
        for perm in itertools.permutations(range(3)):
            assert oracle.canonical_key(mesi, cfg) == oracle.canonical_key(mesi, cfg.permute(perm))
