from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arraymc import oracle
from arraymc.logic import EConst, ForallI, IVar, Read, TRUE, conj, eq
from arraymc.oracle import Configuration
from arraymc.smt import ExistsForallSentence, SmtStats

from conftest import corpus, cube, exists
from sentences import STATE, brute_force, random_sentence, vocabulary

I, J = IVar("i"), IVar("j")


def a(i, sort):
    return Read("a", i, sort)


class TestCheckSentence:
    def test_self_instantiation(self, mesi):
        sort = mesi.array_sorts["a"]
        s = ExistsForallSentence.single([I], [], [J], conj(eq(a(I, sort), EConst("1", sort)),
                                                          eq(a(J, sort), EConst("2", sort))))
        assert mesi.engine().check_sentence(s) is None

    def test_mesi_init_and_unsafe(self, mesi):
        u = mesi.unsafe[0]
        s = ExistsForallSentence(u.vars, (), u.matrix, mesi.init)
        assert mesi.engine().check_sentence(s) is None

    def test_witness_satisfies_sentence(self):
        rng = random.Random(7)
        for kind in ("equality", "linear-order"):
            spec = vocabulary(kind)
            engine = spec.engine()
            for _ in range(60):
                s = random_sentence(rng, kind)
                w = engine.check_sentence(s)
                if w is None:
                    continue
                cfg = Configuration(w.structure, w.arrays)
                assert oracle.eval_sentence(cfg, s, {STATE: ("1", "2")})

    @pytest.mark.parametrize("kind", ["equality", "linear-order"])
    def test_agrees_with_brute_force(self, kind):
        rng = random.Random(kind)
        spec = vocabulary(kind)
        engine = spec.engine()
        for _ in range(100):
            s = random_sentence(rng, kind)
            assert (engine.check_sentence(s) is not None) == brute_force(spec, s), str(s)


class TestCubeSat:
    def test_clash(self, mesi):
        assert not mesi.engine().check_cube_sat(cube(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i1] = 2"))

    def test_two_point_model(self, mesi):
        assert mesi.engine().check_cube_sat(cube(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 1"))

    def test_swap_guard(self, ins_sort):
        q = cube(ins_sort, "i1 i2", "i1 != i2 and i1 != 0 and i2 != 0 and S(i1, i2) and a[i1] = true "
                                    "and a[i2] = false and b[i1] > b[i2]")
        assert ins_sort.engine().check_cube_sat(q)


class TestFixpoint:
    def test_prior_contains_cube(self, mesi):
        q = cube(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 3")
        assert mesi.engine().check_fixpoint(q, [q])

    def test_sub_cube(self, mesi):
        q = cube(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 3")
        assert mesi.engine().check_fixpoint(q, [cube(mesi, "i", "a[i] = 1")])

    def test_contradictory_prior(self, mesi):
        q = cube(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 3")
        p = cube(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 2")
        engine = mesi.engine()
        assert not engine.check_fixpoint(q, [p])
        # the oracle exhibits a configuration of q outside p
        assert any(oracle.eval_cube(cfg, q) and not oracle.eval_cube(cfg, p)
                   for cfg in oracle.enumerate_configurations(mesi, 2))

    def test_empty_prior(self, mesi):
        assert not mesi.engine().check_fixpoint(cube(mesi, "i", "a[i] = 1"), [])


class TestSafety:
    def test_mesi_unsafe_disjoint_from_init(self, mesi):
        engine = mesi.engine()
        assert not any(engine.check_safety(mesi.init, q) for q in mesi.unsafe_cubes())

    def test_trivial_init(self, mesi):
        init = ForallI((I,), TRUE)
        assert mesi.engine().check_safety(init, cube(mesi, "i", "a[i] = 1"))

    def test_insertion_invariant_cube(self, ins_sort):
        q = cube(ins_sort, "i j", "i != j and i != 0 and j != 0 and S(i, j) and a[i] = false and a[j] = true")
        assert not ins_sort.engine().check_safety(ins_sort.init, q)


class TestStats:
    def test_counts_top_level_calls(self, mesi):
        stats = SmtStats()
        engine = mesi.engine(stats)
        q = cube(mesi, "i", "a[i] = 1")
        engine.check_cube_sat(q)
        engine.check_safety(mesi.init, q)
        assert stats.calls == 2
        assert stats.breakdown() == {"safety": 1, "fixpoint": 0, "other": 1}

    def test_monotone(self):
        stats = SmtStats()
        with pytest.raises(ValueError):
            stats.bump("bogus")
        assert stats.calls == 0


# -------------------------------------------------------------- properties


MESI_LITS = ["a[i1] = 1", "a[i1] = 2", "a[i1] = 3", "a[i2] = 1", "a[i2] = 4", "a[i2] = 3", "a[i1] != 4",
             "a[i3] = 2", "a[i3] != 1", "a[i1] = a[i2]"]


@st.composite
def mesi_cubes(draw):
    spec = corpus("mesi")
    k = draw(st.integers(1, 3))
    names = " ".join(f"i{x}" for x in range(1, k + 1))
    pool = [lit for lit in MESI_LITS if all(f"i{x}" not in lit for x in range(k + 1, 4))]
    lits = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=3, unique=True))
    diseq = [f"i{x} != i{y}" for x in range(1, k + 1) for y in range(x + 1, k + 1)]
    return cube(spec, names, " and ".join(diseq + lits))


@settings(max_examples=60, deadline=None)
@given(mesi_cubes(), st.lists(mesi_cubes(), min_size=1, max_size=3))
def test_fixpoint_matches_oracle(c, prior):
    spec = corpus("mesi")
    covered = spec.engine().check_fixpoint(c, prior)
    configs = list(oracle.enumerate_configurations(spec, 4 if covered else 3))
    escapes = any(oracle.eval_cube(cfg, c) and not any(oracle.eval_cube(cfg, p) for p in prior) for cfg in configs)
    assert covered == (not escapes)


def test_exists_helper_keeps_vocabulary(mesi):
    f = exists(mesi, "i", "a[i] = 2")
    assert str(f) == "exists i . a[i] = 2"
