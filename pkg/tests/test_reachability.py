from __future__ import annotations

from dataclasses import replace

import pytest

from arraymc import oracle
from arraymc.errors import ConfigError
from arraymc.logic import FALSE, CaseFunction, IVar, TransitionRule
from arraymc.reachability import (
    CLOSED_UNSAT,
    Tableau,
    breach,
    expand,
    extract_trace,
    preimage,
    preimage_cubes,
    subsume_sweep,
)

from conftest import CORPUS_NAMES, corpus, cube, exists

# systems whose plain backward search terminates quickly
TERMINATING = ["fifteen_locations", "mesi", "mesi_buggy", "moesi", "mutex_naive", "mutex_token"]


def identity_rule(spec, array="a"):
    j = IVar("j")
    sort = spec.array_sorts[array]
    from arraymc.logic import Read, TRUE

    fn = CaseFunction("id", j, (), Read(array, j, sort), sort)
    return TransitionRule("id", (IVar("p"),), TRUE, ((array, fn),))


class TestPreimage:
    def test_unsatisfiable_guard(self, mesi):
        t = replace(mesi.transition("t4"), guard=FALSE)
        q = mesi.unsafe_cubes()[0]
        engine = mesi.engine()
        assert not any(engine.check_cube_sat(p) for p in preimage_cubes(t, q))

    def test_identity_transition(self, mesi):
        t = identity_rule(mesi)
        for q in mesi.unsafe_cubes():
            pre = preimage(t, q)
            for cfg in oracle.enumerate_configurations(mesi, 3):
                assert oracle.eval_formula(cfg, pre) == oracle.eval_cube(cfg, q)

    def test_formula_and_cubes_agree(self, mesi):
        for t in mesi.transitions:
            for q in mesi.unsafe_cubes():
                f = preimage(t, q)
                cubes = preimage_cubes(t, q)
                for cfg in oracle.enumerate_configurations(mesi, 3):
                    assert oracle.eval_formula(cfg, f) == any(oracle.eval_cube(cfg, p) for p in cubes)

    def test_cubes_are_differentiated(self, ins_sort):
        for q in ins_sort.unsafe_cubes():
            for p in preimage_cubes(ins_sort.transitions[0], q, ins_sort.constants):
                assert p.is_differentiated(ins_sort.constants)


class TestExpand:
    def test_mesi_children(self, mesi):
        tab = Tableau(mesi, mesi.engine())
        root = tab.add(mesi.unsafe_cubes()[0], None, None)
        children = expand(tab, root, mesi.transitions)
        assert 0 < len(children) <= 8
        assert all(c.parent == root.id and c.depth == 1 for c in children)
        assert {c.label for c in children} <= {t.name for t in mesi.transitions}

    def test_all_children_unsat(self, mesi):
        tab = Tableau(mesi, mesi.engine())
        root = tab.add(mesi.unsafe_cubes()[0], None, None)
        t = replace(mesi.transition("t4"), guard=FALSE)
        children = expand(tab, root, [t])
        assert all(c.status == CLOSED_UNSAT for c in children)

    def test_no_transitions(self, mesi):
        tab = Tableau(mesi, mesi.engine())
        root = tab.add(mesi.unsafe_cubes()[0], None, None)
        assert expand(tab, root, []) == []
        res = breach(replace(mesi, transitions=()))
        assert res.safe and res.stats.depth == 1


class TestBreach:
    def test_mesi(self, mesi):
        res = breach(mesi)
        assert res.safe
        assert res.stats.depth == 3
        assert res.stats.nodes <= 10

    def test_buggy_mesi(self):
        res = breach(corpus("mesi_buggy"))
        assert res.unsafe and len(res.trace) > 0

    def test_insertion_diverges(self, ins_sort):
        res = breach(ins_sort, max_depth=6)
        assert res.verdict == "unknown" and res.reason == "depth"

    def test_node_budget(self, ins_sort):
        res = breach(ins_sort, max_nodes=10)
        assert res.verdict == "unknown" and res.reason == "nodes"

    def test_deadline(self, ins_sort):
        res = breach(ins_sort, deadline=0.0)
        assert res.verdict == "unknown" and res.reason == "time"

    def test_bad_budget(self, mesi):
        with pytest.raises(ConfigError):
            breach(mesi, max_depth=0)

    def test_explicit_target(self, mesi):
        res = breach(mesi, exists(mesi, "i", "a[i] = 1"))
        assert res.unsafe

    @pytest.mark.parametrize("name", TERMINATING)
    def test_verdict_is_sound(self, name):
        spec = corpus(name)
        res = breach(spec)
        assert res.verdict in ("safe", "unsafe")
        if res.unsafe:
            assert oracle.replay(list(res.trace), spec, 3) is not None
        else:
            assert oracle.forward_search(spec, 6, 3) is None

    @pytest.mark.parametrize("name", TERMINATING)
    def test_safe_result_is_a_fixpoint(self, name):
        spec = corpus(name)
        res = breach(spec)
        if not res.safe:
            return
        engine = spec.engine()
        for b in res.cubes:
            for t in spec.transitions:
                for p in preimage_cubes(t, b, spec.constants):
                    assert engine.check_fixpoint(p, res.cubes)

    @pytest.mark.parametrize("name", TERMINATING)
    def test_subsumption_does_not_change_the_verdict(self, name):
        spec = corpus(name)
        assert breach(spec).verdict == breach(spec, subsume=False).verdict


class TestSubsumeSweep:
    def test_duplicates(self, mesi):
        q = cube(mesi, "i", "a[i] = 1")
        kept, deleted = subsume_sweep(mesi.engine(), [q, q])
        assert deleted == 1 and kept == [q]

    def test_weaker_cube_wins(self, mesi):
        strong = cube(mesi, "i1 i2", "i1 != i2 and a[i1] = 1 and a[i2] = 3")
        weak = cube(mesi, "i", "a[i] = 1")
        kept, deleted = subsume_sweep(mesi.engine(), [strong, weak])
        assert deleted == 1 and kept == [weak]

    def test_disjoint(self, mesi):
        qs = [cube(mesi, "i", "a[i] = 1"), cube(mesi, "i", "a[i] = 2")]
        assert subsume_sweep(mesi.engine(), qs) == (qs, 0)


class TestTrace:
    def test_single_step(self, mesi):
        res = breach(mesi, exists(mesi, "i", "a[i] = 2"))
        assert res.unsafe and list(res.trace) == ["t1"]

    def test_root_meets_init(self, mesi):
        res = breach(mesi, exists(mesi, "i", "a[i] = 4"))
        assert res.unsafe and len(res.trace) == 0
        node = next(n for n in res.nodes if n.status == "unsafe")
        tab = Tableau(mesi, mesi.engine())
        tab.nodes = res.nodes
        assert str(extract_trace(tab, node)) == "(empty)"

    def test_buggy_trace_replays(self):
        spec = corpus("mesi_buggy")
        res = breach(spec)
        assert oracle.replay(list(res.trace), spec, 2) is not None


@pytest.mark.parametrize("name", ["mesi", "mutex_token", "moesi"])
def test_preimage_is_upward_closed(name):
    spec = corpus(name)
    configs = list(oracle.enumerate_configurations(spec, 3))
    for t in spec.transitions:
        for q in spec.unsafe_cubes():
            cubes = preimage_cubes(t, q, spec.constants)
            inside = [cfg for cfg in configs if any(oracle.eval_cube(cfg, p) for p in cubes)]
            for s in inside:
                for cfg in configs:
                    if oracle.config_leq(spec, s, cfg):
                        assert cfg in inside


def test_corpus_has_eight_systems():
    assert len(CORPUS_NAMES) >= 8
