from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defect_sage.query import (
    DEFAULT_CUTOFF,
    Disambiguation,
    LeafResolved,
    MatchKind,
    UnknownTermError,
    close_matches,
    disambiguate,
    interpret_query,
    query_vocabulary,
    similarity_ratio,
)
from oracles import gestalt_ratio

# 14 matched characters over lengths 7 + 8: the known score for both
# misspellings exercised throughout the suite.
TYPO_RATIO = 14 / 15


# -- similarity_ratio --------------------------------------------------------


def test_similarity_known_values():
    assert similarity_ratio("porsity", "porosity") == pytest.approx(TYPO_RATIO, abs=1e-12)
    assert similarity_ratio("crackng", "cracking") == pytest.approx(TYPO_RATIO, abs=1e-12)
    assert similarity_ratio("", "") == 1.0
    assert similarity_ratio("", "abc") == 0.0
    assert similarity_ratio("same", "same") == 1.0


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126),
               max_size=16),
       st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126),
               max_size=16))
@settings(max_examples=300, deadline=None)
def test_similarity_matches_reference_oracle(a, b):
    assert abs(similarity_ratio(a, b) - gestalt_ratio(a, b)) <= 1e-12


@given(st.text(max_size=24), st.text(max_size=24))
@settings(max_examples=200, deadline=None)
def test_similarity_stays_in_unit_interval(a, b):
    score = similarity_ratio(a, b)
    assert 0.0 <= score <= 1.0


def test_similarity_against_oracle_random_sweep():
    rng = random.Random(1234)
    alphabet = "abcdefghij -_/."
    for _ in range(2000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))
        assert abs(similarity_ratio(a, b) - gestalt_ratio(a, b)) <= 1e-12, (a, b)


# -- close_matches -----------------------------------------------------------


def test_close_matches_ranks_best_first(kb):
    vocab = query_vocabulary(kb)
    results = close_matches("porsity", vocab)
    assert results[0][0] == "Porosity"
    assert results[0][1] == pytest.approx(TYPO_RATIO, abs=1e-12)
    assert len(results) <= 3
    scores = [s for _, s in results]
    assert scores == sorted(scores, reverse=True)


def test_close_matches_respects_cutoff_and_limit():
    vocab = ["alpha", "alpine", "beta"]
    assert close_matches("alp", vocab, cutoff=0.99) == []
    limited = close_matches("alpha", vocab, n=1, cutoff=0.1)
    assert len(limited) == 1 and limited[0][0] == "alpha"
    with pytest.raises(ValueError):
        close_matches("x", vocab, cutoff=1.5)


def test_close_matches_ties_keep_vocabulary_order():
    # Both candidates score identically against the needle; the earlier
    # vocabulary entry must come out first either way round.
    assert similarity_ratio("abx", "abc") == similarity_ratio("abx", "abd")
    first = close_matches("abx", ["abc", "abd"], cutoff=0.1)
    second = close_matches("abx", ["abd", "abc"], cutoff=0.1)
    assert [t for t, _ in first] == ["abc", "abd"]
    assert [t for t, _ in second] == ["abd", "abc"]


def test_close_matches_is_case_insensitive():
    results = close_matches("BALLING", ["Balling"], cutoff=0.6)
    assert results == [("Balling", 1.0)]


# -- query vocabulary --------------------------------------------------------


def test_query_vocabulary_excludes_placeholders(kb):
    vocab = query_vocabulary(kb)
    assert "Main" not in vocab and "Other" not in vocab
    assert "Porosity" in vocab and "Balling" in vocab
    assert len(vocab) == 35


# -- interpret_query ---------------------------------------------------------


def test_exact_substring_resolves_without_fuzz(kb):
    interp = interpret_query("Tell me about gas porosity", kb)
    assert interp.match_kind is MatchKind.EXACT_SUBSTRING
    assert interp.resolved_term == "Gas porosity"
    assert interp.similarity == 1.0


def test_exact_substring_prefers_longest_term(kb):
    # "lack of fusion porosity" contains both the leaf and the bare
    # "Porosity" category; the more specific term must win.
    interp = interpret_query("explore lack of fusion porosity", kb)
    assert interp.match_kind is MatchKind.EXACT_SUBSTRING
    assert interp.resolved_term == "Lack of fusion porosity"
    assert "Porosity" in [t for t, _ in interp.alternates]


def test_fuzzy_resolution_of_misspellings(kb):
    porsity = interpret_query("porsity", kb)
    assert porsity.match_kind is MatchKind.FUZZY
    assert porsity.resolved_term == "Porosity"
    assert porsity.similarity == pytest.approx(TYPO_RATIO, abs=1e-9)

    crackng = interpret_query("crackng", kb)
    assert crackng.match_kind is MatchKind.FUZZY
    assert crackng.resolved_term == "Cracking"
    assert crackng.similarity == pytest.approx(TYPO_RATIO, abs=1e-9)


def test_fuzzy_scores_tokens_inside_sentences(kb):
    interp = interpret_query("I think we have ballin on this part", kb)
    assert interp.match_kind is MatchKind.FUZZY
    assert interp.resolved_term == "Balling"


def test_unrelated_text_resolves_to_nothing(kb):
    interp = interpret_query("tell me about the weather", kb)
    assert interp.match_kind is MatchKind.NONE
    assert interp.resolved_term is None
    assert interp.similarity == 0.0
    assert interp.alternates == ()


def test_empty_and_whitespace_inputs_miss(kb):
    for text in ("", "   ", "\t\n"):
        interp = interpret_query(text, kb)
        assert interp.match_kind is MatchKind.NONE


def test_alternates_are_sorted_and_capped(kb):
    interp = interpret_query("porsity", kb, n=3)
    assert len(interp.alternates) <= 2
    scores = [s for _, s in interp.alternates]
    assert all(interp.similarity >= s for s in scores)
    assert scores == sorted(scores, reverse=True)
    assert all(s >= DEFAULT_CUTOFF for s in scores)


@given(st.text(max_size=40))
@settings(max_examples=300, deadline=None)
def test_interpret_query_is_total(kb, text):
    interp = interpret_query(text, kb)
    assert interp.raw_input == text
    if interp.match_kind is MatchKind.NONE:
        assert interp.resolved_term is None
    else:
        assert interp.resolved_term in query_vocabulary(kb)
        assert interp.similarity >= DEFAULT_CUTOFF
    assert 0.0 <= interp.similarity <= 1.0


def test_interpretation_never_yields_placeholders(kb):
    # "weather" scores 0.67 against "other"; the placeholder must stay
    # unreachable so the query falls through to a miss.
    assert similarity_ratio("weather", "other") > DEFAULT_CUTOFF
    interp = interpret_query("weather", kb)
    assert interp.resolved_term != "Other"
    assert interp.match_kind is MatchKind.NONE


# -- disambiguate ------------------------------------------------------------


def test_disambiguate_leaf_is_final(kb):
    result = disambiguate("Balling", kb)
    assert isinstance(result, LeafResolved)
    assert result.leaf == "Balling"


def test_disambiguate_category_lists_subtypes(kb):
    result = disambiguate("Cracking", kb)
    assert isinstance(result, Disambiguation)
    assert result.parent == "Cracking"
    assert result.options == (
        "Solidification cracking",
        "Ductility-dip cracking",
        "Reheat and post weld heat treatment cracking",
        "Strain age cracking",
        "Lamellar cracking/Delamination",
        "Copper contamination cracking",
    )

    porosity = disambiguate("porosity", kb)
    assert isinstance(porosity, Disambiguation)
    assert len(porosity.options) == 4


def test_disambiguate_prefers_leaf_over_category(kb):
    # "Solidification cracking" names both a category and its only leaf.
    result = disambiguate("Solidification cracking", kb)
    assert isinstance(result, LeafResolved)
    assert result.leaf == "Solidification cracking"


def test_disambiguate_options_are_all_leaves(kb):
    for term in ("Cracking", "Porosity", "Geometric and dimensional inaccuracy"):
        result = disambiguate(term, kb)
        assert isinstance(result, Disambiguation)
        assert all(kb.is_leaf(option) for option in result.options)
        assert len(result.options) >= 1


def test_disambiguate_rejects_unknown_terms(kb):
    with pytest.raises(UnknownTermError):
        disambiguate("weather", kb)
