"""Free-text query interpretation over the defect vocabulary.

Matching runs in three stages: exact substring containment, then gestalt
similarity (Ratcliff/Obershelp as implemented by difflib, junk filtering
disabled), then a typed miss. Comparison is always case-insensitive with
collapsed whitespace.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from difflib import SequenceMatcher
from enum import Enum

from .knowledge import KnowledgeBase

DEFAULT_CUTOFF = 0.6
DEFAULT_LIMIT = 3

# Navigation placeholders shared by several subtrees. They are not defect
# terminology, so free-text matching must never resolve to them (an input
# like "weather" sits above the cutoff against "Other").
STRUCTURAL_PLACEHOLDERS = frozenset({"main", "other"})


class MatchKind(Enum):
    EXACT_SUBSTRING = "exact_substring"
    FUZZY = "fuzzy"
    NONE = "none"


@dataclass(frozen=True)
class QueryInterpretation:
    raw_input: str
    resolved_term: str | None
    match_kind: MatchKind
    similarity: float
    alternates: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class LeafResolved:
    leaf: str


@dataclass(frozen=True)
class Disambiguation:
    parent: str
    options: tuple[str, ...]


class UnknownTermError(KeyError):
    """Raised when disambiguation is asked for a name outside the taxonomy."""


def _clean(text: str) -> str:
    return " ".join(text.split())


def similarity_ratio(a: str, b: str) -> float:
    """Gestalt similarity 2M/(len(a)+len(b)) in [0, 1]; two empty strings score 1.0."""
    return SequenceMatcher(None, a, b, autojunk=False).ratio()


def close_matches(term: str, vocabulary: list[str], n: int = DEFAULT_LIMIT,
                  cutoff: float = DEFAULT_CUTOFF) -> list[tuple[str, float]]:
    """Vocabulary terms scoring at least ``cutoff`` against ``term``, best first.

    Scoring is case-insensitive. Ties keep vocabulary order, so results are
    stable for a fixed vocabulary.
    """
    if not 0.0 <= cutoff <= 1.0:
        raise ValueError(f"cutoff must be within [0, 1], got {cutoff}")
    needle = _clean(term).lower()
    scored = []
    for candidate in vocabulary:
        score = similarity_ratio(needle, candidate.lower())
        if score >= cutoff:
            scored.append((candidate, score))
    scored.sort(key=lambda pair: pair[1], reverse=True)
    return scored[:n]


def query_vocabulary(kb: KnowledgeBase) -> list[str]:
    """All taxonomy terms usable as free-text targets (placeholders removed)."""
    return [t for t in kb.vocabulary("all_terms") if t.lower() not in STRUCTURAL_PLACEHOLDERS]


def _tokenize(text: str) -> list[str]:
    tokens = []
    for raw in text.split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def interpret_query(text: str, kb: KnowledgeBase, cutoff: float = DEFAULT_CUTOFF,
                    n: int = DEFAULT_LIMIT) -> QueryInterpretation:
    """Resolve free text to a taxonomy term.

    Stage 1 looks for vocabulary terms contained verbatim in the input
    (longest wins). Stage 2 scores every vocabulary term against each input
    token and the whole input, keeping the best score per term. Stage 3 is a
    miss with no resolved term.
    """
    cleaned = _clean(text)
    lowered = cleaned.lower()
    vocab = query_vocabulary(kb)

    contained = [t for t in vocab if t.lower() in lowered]
    if contained:
        contained.sort(key=len, reverse=True)
        resolved, *rest = contained
        return QueryInterpretation(
            raw_input=text,
            resolved_term=resolved,
            match_kind=MatchKind.EXACT_SUBSTRING,
            similarity=1.0,
            alternates=tuple((t, 1.0) for t in rest[: n - 1]),
        )

    candidates = _tokenize(lowered)
    if lowered and lowered not in candidates:
        candidates.append(lowered)
    best_per_term: list[tuple[str, float]] = []
    for term in vocab:
        term_lower = term.lower()
        score = max((similarity_ratio(c, term_lower) for c in candidates), default=0.0)
        if score >= cutoff:
            best_per_term.append((term, score))
    best_per_term.sort(key=lambda pair: pair[1], reverse=True)
    if best_per_term:
        resolved, score = best_per_term[0]
        return QueryInterpretation(
            raw_input=text,
            resolved_term=resolved,
            match_kind=MatchKind.FUZZY,
            similarity=score,
            alternates=tuple(best_per_term[1:n]),
        )

    return QueryInterpretation(raw_input=text, resolved_term=None,
                               match_kind=MatchKind.NONE, similarity=0.0)


def disambiguate(term: str, kb: KnowledgeBase) -> LeafResolved | Disambiguation:
    """Decide whether a resolved term is final or needs a subtype choice.

    Leaves win over same-named categories ("Solidification cracking" is
    both). Category hits list the leaves of the first matching subtree in
    document order.
    """
    canon = kb.canonical_term(term)
    if canon is None:
        raise UnknownTermError(f"not a taxonomy term: {term!r}")
    if kb.is_leaf(canon):
        return LeafResolved(leaf=canon)
    options = kb.subtree_leaves(canon)
    return Disambiguation(parent=canon, options=tuple(options))
