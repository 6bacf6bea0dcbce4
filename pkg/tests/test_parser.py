from __future__ import annotations

import pytest

from arraymc.errors import FunctionalFormError, PartitionError, SpecError
from arraymc.parser import corpus_options, format_spec, parse_spec, tokenize
from arraymc.theories import BooleanTheory, Enumerated, Rationals

from conftest import CORPUS, CORPUS_NAMES, corpus

HEADER = """system t
index-theory equality
elem state = enum {1, 2}
array a : state
"""
UNSAFE = "unsafe exists i . a[i] = 2\n"


class TestCorpus:
    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_parses_and_round_trips(self, name):
        spec = corpus(name)
        again = parse_spec(format_spec(spec))
        assert again == spec

    def test_mesi_shape(self, mesi):
        assert len(mesi.transitions) == 4
        assert [a for a, _ in mesi.arrays] == ["a"]
        th = mesi.elem_theories[mesi.array_sorts["a"]]
        assert isinstance(th, Enumerated) and th.values == ("1", "2", "3", "4")

    def test_insertion_shape(self, ins_sort):
        assert len(ins_sort.transitions) == 1
        sorts = ins_sort.array_sorts
        assert isinstance(ins_sort.elem_theories[sorts["a"]], BooleanTheory)
        assert isinstance(ins_sort.elem_theories[sorts["b"]], Rationals)
        assert ins_sort.index_theory.kind == "successor"

    def test_file_options(self):
        text = (CORPUS / "ins_sort.spec").read_text()
        assert corpus_options(text) == ["--mode", "breach+inv", "--abstraction", "index"]


class TestErrors:
    def test_syntax_error_position(self):
        with pytest.raises(SpecError) as exc:
            parse_spec(HEADER + "init forall i . a[i] = = 1\n")
        assert exc.value.line == 5 and exc.value.col is not None

    def test_unknown_statement(self):
        with pytest.raises(SpecError):
            parse_spec(HEADER + "frobnicate\n")

    def test_sort_error(self):
        with pytest.raises(SpecError):
            parse_spec(HEADER + "unsafe exists i . a[i] = 7\n")

    def test_index_compared_with_element(self):
        with pytest.raises(SpecError):
            parse_spec(HEADER + "unsafe exists i . a[i] = i\n")

    def test_two_universal_variables(self):
        with pytest.raises(FunctionalFormError):
            parse_spec(HEADER + "transition t exists i\n  update a[j, k] := 1\n")

    def test_array_updated_twice(self):
        with pytest.raises(FunctionalFormError):
            parse_spec(HEADER + "transition t exists i\n  update a[j] := 1\n  update a[j] := 2\n")

    def test_overlapping_guards(self):
        with pytest.raises(PartitionError):
            parse_spec(HEADER + "transition t exists i\n"
                       "  update a[j] case j = i -> 1 ; a[j] = 1 -> 2 ; else -> a[j]\n" + UNSAFE)

    def test_non_exhaustive_guards(self):
        with pytest.raises(PartitionError):
            parse_spec(HEADER + "transition t exists i\n  update a[j] case j = i -> 1\n" + UNSAFE)

    def test_guards_disjoint_under_the_transition_guard(self):
        spec = parse_spec(HEADER + "transition t exists i k\n  guard i != k\n"
                          "  update a[j] case j = i -> 1 ; j = k -> 2 ; else -> a[j]\n" + UNSAFE)
        assert spec.transitions[0].name == "t"

    def test_unbound_variable(self):
        with pytest.raises(SpecError):
            parse_spec(HEADER + "transition t exists i\n  guard a[k] = 1\n  update a[j] := 1\n")

    def test_bad_index_theory(self):
        with pytest.raises(SpecError):
            parse_spec("system t\nindex-theory forest\n")


def test_tokenizer_tracks_lines():
    toks = tokenize("system t\n  array a : s\n")
    arr = next(t for t in toks if t.text == "array")
    assert (arr.line, arr.col) == (2, 3)


def test_suggested_invariants_are_kept():
    spec = parse_spec(HEADER + "suggest_invariant exists i . a[i] = 2\n" + UNSAFE)
    assert len(spec.suggested) == 1
