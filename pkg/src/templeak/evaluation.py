"""Entity-level scoring and the template-memorizer baseline.

The memorizer is deliberately dumb: it stores the entities of one training
document per template signature and replays them verbatim for any test
document with a known signature. On a split where templates straddle train
and test it scores highly without understanding anything; on a group-atomic
split it scores zero. The gap between the two is a direct measure of how
much a benchmark rewards memorization.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable

from .errors import InvalidParameter
from .grouping import GroupingResult
from .model import Corpus, Document, Split
from .resampling import SplitManifest
from .similarity import normalize_text


@dataclass(frozen=True)
class ExtractedEntity:
    label: str
    text: str  # normalized for comparison
    doc_id: str
    tokens: tuple[str, ...] | None = None  # normalized, only used in segment mode


@dataclass(frozen=True)
class EvalMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def document_entities(doc: Document) -> list[ExtractedEntity]:
    """The document's gold entities in comparison form."""
    return [
        ExtractedEntity(
            label=entity.label,
            text=normalize_text(entity.text),
            doc_id=doc.doc_id,
            tokens=tuple(normalize_text(t.text) for t in entity.tokens),
        )
        for entity in doc.entities
    ]


def _match_key(entity: ExtractedEntity, mode: str):
    if mode == "text":
        return (entity.doc_id, entity.label, normalize_text(entity.text))
    if mode == "segment":
        tokens = entity.tokens if entity.tokens is not None else ()
        return (entity.doc_id, entity.label, tuple(normalize_text(t) for t in tokens))
    raise InvalidParameter(f"unknown match mode {mode!r}")


def metrics_from_counts(tp: int, fp: int, fn: int) -> EvalMetrics:
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalMetrics(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)


def entity_f1(
    gold: Iterable[ExtractedEntity],
    pred: Iterable[ExtractedEntity],
    mode: str = "text",
) -> EvalMetrics:
    """Micro precision/recall/F1 over exact entity matches.

    A prediction is a true positive iff an unmatched gold entity of the same
    document with identical (label, normalized text) exists; each gold
    matches at most once. ``mode="segment"`` matches on the normalized token
    sequence instead of the flat text. Order of either list is irrelevant.
    """
    if mode not in ("text", "segment"):
        raise InvalidParameter(f"unknown match mode {mode!r}")
    gold_counts = Counter(_match_key(e, mode) for e in gold)
    pred_counts = Counter(_match_key(e, mode) for e in pred)
    tp = sum(min(count, pred_counts[key]) for key, count in gold_counts.items())
    fp = sum(pred_counts.values()) - tp
    fn = sum(gold_counts.values()) - tp
    return metrics_from_counts(tp, fp, fn)


Signature = Callable[[Document], Hashable | None]


def group_signature(groups: GroupingResult) -> Signature:
    """Template signature from a grouping: the document's group id."""
    group_of = groups.group_of()
    return lambda doc: group_of.get(doc.doc_id)


@dataclass
class MemorizerModel:
    """Replay index: template signature -> entities of one training document."""

    template_index: dict[Hashable, tuple[ExtractedEntity, ...]]
    signature: Signature


def fit_memorizer(train_docs: Iterable[Document], signature: Signature) -> MemorizerModel:
    """Index the first (doc_id-sorted) training document per signature value.

    Documents whose signature is None are not indexed.
    """
    index: dict[Hashable, tuple[ExtractedEntity, ...]] = {}
    for doc in sorted(train_docs, key=lambda d: d.doc_id):
        sig = signature(doc)
        if sig is None or sig in index:
            continue
        index[sig] = tuple(document_entities(doc))
    return MemorizerModel(template_index=index, signature=signature)


def predict_memorizer(model: MemorizerModel, doc: Document) -> list[ExtractedEntity]:
    """Replay the stored entities for the document's signature, if indexed."""
    sig = model.signature(doc)
    if sig is None:
        return []
    stored = model.template_index.get(sig)
    if stored is None:
        return []
    return [
        ExtractedEntity(label=e.label, text=e.text, doc_id=doc.doc_id, tokens=e.tokens)
        for e in stored
    ]


@dataclass(frozen=True)
class GapResult:
    f1_leaky: float
    f1_clean: float
    gap: float
    leaky_metrics: EvalMetrics
    clean_metrics: EvalMetrics

    def to_dict(self) -> dict:
        return {"f1_leaky": self.f1_leaky, "f1_clean": self.f1_clean, "gap": self.gap}


def _score_manifest(corpus: Corpus, manifest: SplitManifest, signature: Signature) -> EvalMetrics:
    by_id = corpus.by_id()
    train_docs = [by_id[d] for d in manifest.members(Split.TRAIN) if d in by_id]
    test_docs = [by_id[d] for d in manifest.members(Split.TEST) if d in by_id]
    model = fit_memorizer(train_docs, signature)
    gold: list[ExtractedEntity] = []
    pred: list[ExtractedEntity] = []
    for doc in test_docs:
        gold.extend(document_entities(doc))
        pred.extend(predict_memorizer(model, doc))
    return entity_f1(gold, pred)


def leakage_gap_experiment(
    corpus: Corpus,
    groups: GroupingResult,
    leaky: SplitManifest,
    clean: SplitManifest,
) -> GapResult:
    """Memorizer F1 on a leaky split vs a group-atomic one.

    The memorizer keys on the grouping's template signature, so on a clean
    manifest every test signature is unseen and its F1 collapses to zero;
    the remaining score on the leaky manifest is what leakage alone buys.
    """
    signature = group_signature(groups)
    leaky_metrics = _score_manifest(corpus, leaky, signature)
    clean_metrics = _score_manifest(corpus, clean, signature)
    return GapResult(
        f1_leaky=leaky_metrics.f1,
        f1_clean=clean_metrics.f1,
        gap=leaky_metrics.f1 - clean_metrics.f1,
        leaky_metrics=leaky_metrics,
        clean_metrics=clean_metrics,
    )
