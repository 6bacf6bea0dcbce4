from __future__ import annotations

import random

import pytest

from arraymc.reachability import breach
from arraymc.smt import ExistsForallSentence
from arraymc.smtlib import DumpWriter, dump_smtlib2, to_smtlib2

from conftest import corpus
from sentences import random_sentence, vocabulary


def test_script_shape(mesi):
    u = mesi.unsafe[0]
    text = to_smtlib2(ExistsForallSentence(u.vars, (), u.matrix, mesi.init), mesi.engine(), "init and unsafe")
    assert text.startswith("; init and unsafe\n(set-logic ALL)")
    assert "(declare-sort Index 0)" in text
    assert "(declare-datatype state (" in text
    assert "(declare-fun a (Index) state)" in text
    assert "(forall ((i Index))" in text
    assert text.rstrip().endswith("(check-sat)")
    assert text.count("(") == text.count(")")


def test_quantifier_free_without_universal_block(mesi):
    u = mesi.unsafe[0]
    text = to_smtlib2(ExistsForallSentence(u.vars, (), u.matrix, ()), mesi.engine())
    assert "forall" not in text


def test_rationals_and_successor(ins_sort):
    u = ins_sort.unsafe[0]
    text = to_smtlib2(ExistsForallSentence(u.vars, (), u.matrix, ins_sort.init), ins_sort.engine())
    assert "(set-logic ALL)" not in text
    assert "(declare-fun b (Index) Real)" in text
    assert "(declare-fun S (Index Index) Bool)" in text


def test_dump_writer(tmp_path, mesi):
    engine = mesi.engine()
    writer = DumpWriter(tmp_path, engine).install()
    breach(mesi, engine=engine)
    assert writer.count == len(list(tmp_path.glob("*.smt2"))) > 0
    path = dump_smtlib2(ExistsForallSentence((), (), mesi.init[0].matrix, ()), tmp_path / "x.smt2", engine)
    assert path.read_text().endswith("(check-sat)\n")


def _z3_verdict(text: str):
    z3 = pytest.importorskip("z3")
    solver = z3.Solver()
    solver.set("timeout", 5000)
    solver.from_string(text)
    r = solver.check()
    return None if r == z3.unknown else r == z3.sat


@pytest.mark.parametrize("name", ["mesi", "fifteen_locations", "ins_sort", "mutex_token"])
def test_external_solver_agrees_on_search_queries(name):
    pytest.importorskip("z3")
    spec = corpus(name)
    engine = spec.engine()
    seen: list = []
    engine.dump_hook = lambda kind, s: seen.append(s)
    breach(spec, engine=engine, max_depth=3)
    engine.dump_hook = None
    assert seen
    for s in seen[:30]:
        ext = _z3_verdict(to_smtlib2(s, engine))
        if ext is not None:
            assert ext == (engine.check_sentence(s) is not None), str(s)


@pytest.mark.parametrize("kind", ["equality", "linear-order"])
def test_external_solver_agrees_on_random_sentences(kind):
    pytest.importorskip("z3")
    spec = vocabulary(kind)
    engine = spec.engine()
    rng = random.Random(kind)
    for _ in range(40):
        s = random_sentence(rng, kind)
        ext = _z3_verdict(to_smtlib2(s, engine))
        if ext is not None:
            assert ext == (engine.check_sentence(s) is not None), str(s)
