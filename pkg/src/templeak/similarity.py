"""Pairwise document similarity: question overlap, business keys, shingles.

Forms that come from the same blank master share their slot names, so two
form documents are compared by the overlap of their normalized question
strings. Receipts from one business repeat the business name/address, so
receipts are keyed exactly on those fields. A token-shingle Jaccard metric
covers corpora with neither kind of annotation.

All scoring here is pure; :func:`candidate_pairs` is the inverted-index
blocking step that keeps grouping sub-quadratic.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from itertools import combinations

from .errors import InvalidParameter
from .model import Corpus, Document

QuestionSet = frozenset[str]

# Non-key for shingle blocking: documents with no shingles at all still pair
# with each other (their Jaccard is defined as 1.0), so they share this key.
_EMPTY_SHINGLE_KEY: tuple = ()

# "shingle" and "shingle_jaccard" name the same metric.
_SHINGLE_NAMES = ("shingle", "shingle_jaccard")


def _strip_edge_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def normalize_text(raw: str) -> str:
    """Canonical comparison form of a string.

    NFKC-normalized, lowercased, leading/trailing punctuation stripped from
    each whitespace-separated token (tokens that were pure punctuation are
    removed), whitespace collapsed to single spaces. Idempotent.
    """
    text = unicodedata.normalize("NFKC", raw).lower()
    parts = []
    for token in text.split():
        token = _strip_edge_punctuation(token)
        if token:
            parts.append(token)
    return " ".join(parts)


def extract_question_set(doc: Document) -> QuestionSet:
    """Normalized texts of the document's question-labelled entities."""
    questions = set()
    for entity in doc.entities:
        if entity.label != "question":
            continue
        text = normalize_text(entity.text)
        if text:
            questions.add(text)
    return frozenset(questions)


def question_overlap(a: QuestionSet, b: QuestionSet) -> float:
    """|a ∩ b| / max(|a|, |b|); 0.0 when both sets are empty."""
    larger = max(len(a), len(b))
    if larger == 0:
        return 0.0
    return len(a & b) / larger


@dataclass(frozen=True)
class TemplateKey:
    key: str
    source: str  # "company", "address" or "fallback_none"

    NONE_SOURCE = "fallback_none"

    @property
    def is_fallback(self) -> bool:
        return self.source == self.NONE_SOURCE


def business_key(doc: Document) -> TemplateKey:
    """Exact grouping key for a receipt: company name, else address, else none.

    Documents whose key source is ``fallback_none`` can only ever be
    singleton groups.
    """
    by_label = {}
    for entity in doc.entities:
        by_label.setdefault(entity.label, entity.text)
    for source in ("company", "address"):
        if source in by_label:
            key = normalize_text(by_label[source])
            if key:
                return TemplateKey(key=key, source=source)
    return TemplateKey(key="", source=TemplateKey.NONE_SOURCE)


def _shingle_set(doc: Document, k: int) -> frozenset[tuple[str, ...]]:
    texts = [normalize_text(t.text) for t in doc.tokens]
    texts = [t for t in texts if t]
    return frozenset(tuple(texts[i : i + k]) for i in range(len(texts) - k + 1))


def shingle_jaccard(a: Document, b: Document, k: int = 3) -> float:
    """Jaccard similarity of the documents' k-gram sets over normalized tokens.

    Two documents that both have no shingles (fewer than k usable tokens)
    score 1.0; exactly one empty side scores 0.0.
    """
    if k < 1:
        raise InvalidParameter(f"shingle size must be >= 1, got {k}")
    sa, sb = _shingle_set(a, k), _shingle_set(b, k)
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


@dataclass(frozen=True)
class SimilarityEdge:
    doc_a: str
    doc_b: str
    score: float

    @classmethod
    def canonical(cls, a: str, b: str, score: float) -> "SimilarityEdge":
        if a > b:
            a, b = b, a
        return cls(doc_a=a, doc_b=b, score=score)


def candidate_pairs(corpus: Corpus, metric: str, k: int = 3) -> list[tuple[str, str]]:
    """All unordered document pairs that can possibly score above zero.

    Built from an inverted index (question string -> docs, or shingle ->
    docs), deduplicated and canonically ordered. Superset of every pair with
    a positive metric score; for the metrics here it is exactly that set.
    """
    index: dict[object, list[str]] = {}
    if metric == "question_overlap":
        for doc in corpus.documents:
            for question in extract_question_set(doc):
                index.setdefault(question, []).append(doc.doc_id)
    elif metric in _SHINGLE_NAMES:
        if k < 1:
            raise InvalidParameter(f"shingle size must be >= 1, got {k}")
        for doc in corpus.documents:
            shingles = _shingle_set(doc, k) or {_EMPTY_SHINGLE_KEY}
            for shingle in shingles:
                index.setdefault(shingle, []).append(doc.doc_id)
    else:
        raise InvalidParameter(f"unknown blocking metric {metric!r}")

    pairs: set[tuple[str, str]] = set()
    for ids in index.values():
        if len(ids) < 2:
            continue
        for a, b in combinations(sorted(set(ids)), 2):
            pairs.add((a, b))
    return sorted(pairs)


def pair_scorer(corpus: Corpus, metric: str, k: int = 3):
    """Return score(doc_id, doc_id) -> float with per-document state precomputed."""
    if metric == "question_overlap":
        sets = {doc.doc_id: extract_question_set(doc) for doc in corpus.documents}
        return lambda a, b: question_overlap(sets[a], sets[b])
    if metric in _SHINGLE_NAMES:
        if k < 1:
            raise InvalidParameter(f"shingle size must be >= 1, got {k}")
        shingles = {doc.doc_id: _shingle_set(doc, k) for doc in corpus.documents}

        def score(a: str, b: str) -> float:
            sa, sb = shingles[a], shingles[b]
            if not sa and not sb:
                return 1.0
            if not sa or not sb:
                return 0.0
            return len(sa & sb) / len(sa | sb)

        return score
    raise InvalidParameter(f"unknown similarity metric {metric!r}")
