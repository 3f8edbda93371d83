"""Template groups: similarity graph, connected components, tuning.

A template group is a maximal set of documents judged to share one template.
For graded metrics that is a connected component of the thresholded
similarity graph (transitive closure is the only rule that guarantees a
partition from pairwise scores); for receipts it is an exact business-key
equivalence class.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

from .errors import InvalidParameter, UnknownDocId
from .model import Corpus
from .similarity import SimilarityEdge, TemplateKey, business_key, candidate_pairs, pair_scorer

# Bucket anchors used when re-binning a receipt histogram for side-by-side
# comparison with published group-size charts. The raw histogram is always
# reported too.
SROIE_FIGURE_ANCHORS = (1, 9, 17, 26, 34, 42, 51, 59, 67, 75)


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, items: Iterable[str]):
        self.parent = {item: item for item in items}
        self.size = {item: 1 for item in self.parent}

    def find(self, item: str) -> str:
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def components(self) -> list[list[str]]:
        buckets: dict[str, list[str]] = {}
        for item in self.parent:
            buckets.setdefault(self.find(item), []).append(item)
        return list(buckets.values())


@dataclass(frozen=True)
class TemplateGroup:
    group_id: int
    members: tuple[str, ...]  # sorted

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class GroupingResult:
    groups: list[TemplateGroup]
    threshold: float
    metric: str

    def group_of(self) -> dict[str, int]:
        return {doc_id: g.group_id for g in self.groups for doc_id in g.members}

    def doc_ids(self) -> set[str]:
        return {doc_id for g in self.groups for doc_id in g.members}


def _result_from_components(components: Iterable[Iterable[str]], metric: str, threshold: float) -> GroupingResult:
    ordered = sorted((tuple(sorted(c)) for c in components), key=lambda members: members[0])
    groups = [TemplateGroup(group_id=i, members=members) for i, members in enumerate(ordered)]
    return GroupingResult(groups=groups, threshold=threshold, metric=metric)


def build_similarity_graph(
    corpus: Corpus, metric: str, threshold: float, k: int = 3
) -> list[SimilarityEdge]:
    """Candidate pairs scoring at or above the threshold, canonically ordered.

    The comparison is inclusive (score >= threshold) so boundary documents
    group together.
    """
    if not 0.0 < threshold <= 1.0:
        raise InvalidParameter(f"threshold must be in (0, 1], got {threshold}")
    score = pair_scorer(corpus, metric, k)
    edges = []
    for a, b in candidate_pairs(corpus, metric, k):
        s = score(a, b)
        if s >= threshold:
            edges.append(SimilarityEdge.canonical(a, b, s))
    edges.sort(key=lambda e: (e.doc_a, e.doc_b))
    return edges


def connected_components(
    edges: Iterable[SimilarityEdge],
    corpus: Corpus,
    metric: str = "question_overlap",
    threshold: float = 0.0,
) -> GroupingResult:
    """Partition the corpus into template groups by edge connectivity.

    Every document starts as a singleton; the result ordering is imposed by
    sorting afterwards, so union order never matters.
    """
    ids = set(corpus.doc_ids())
    uf = UnionFind(sorted(ids))
    for edge in edges:
        for endpoint in (edge.doc_a, edge.doc_b):
            if endpoint not in ids:
                raise UnknownDocId(f"edge endpoint {endpoint!r} not in corpus")
        uf.union(edge.doc_a, edge.doc_b)
    return _result_from_components(uf.components(), metric, threshold)


def business_keys(corpus: Corpus) -> dict[str, TemplateKey]:
    return {doc.doc_id: business_key(doc) for doc in corpus.documents}


def group_by_key(corpus: Corpus, keys: Mapping[str, TemplateKey]) -> GroupingResult:
    """Group documents with identical non-fallback keys; fallbacks stay singletons."""
    buckets: dict[tuple[str, str], list[str]] = {}
    singletons: list[list[str]] = []
    for doc_id in corpus.doc_ids():
        key = keys.get(doc_id)
        if key is None or key.is_fallback:
            singletons.append([doc_id])
        else:
            buckets.setdefault((key.source, key.key), []).append(doc_id)
    return _result_from_components(list(buckets.values()) + singletons, "business_key", 1.0)


def group_corpus(corpus: Corpus, metric: str, threshold: float = 0.7, k: int = 3) -> GroupingResult:
    """Full grouping pipeline for one corpus under one metric."""
    if metric == "business_key":
        return group_by_key(corpus, business_keys(corpus))
    edges = build_similarity_graph(corpus, metric, threshold, k)
    return connected_components(edges, corpus, metric, threshold)


def group_size_histogram(result: GroupingResult) -> dict[int, int]:
    histogram: dict[int, int] = {}
    for group in result.groups:
        histogram[len(group)] = histogram.get(len(group), 0) + 1
    return histogram


def rebin_histogram(histogram: Mapping[int, int], anchors: Iterable[int] = SROIE_FIGURE_ANCHORS) -> dict[int, int]:
    """Sum histogram counts into the nearest anchor bucket (ties go low)."""
    anchors = sorted(anchors)
    if not anchors:
        raise InvalidParameter("anchors must be non-empty")
    rebinned = {anchor: 0 for anchor in anchors}
    for size, count in histogram.items():
        nearest = min(anchors, key=lambda a: (abs(a - size), a))
        rebinned[nearest] += count
    return rebinned


@dataclass
class GroundTruthGrouping:
    """Manually labelled template groups over a subset of the corpus."""

    groups: tuple[frozenset[str], ...]

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[str]]) -> "GroundTruthGrouping":
        frozen = tuple(frozenset(g) for g in groups if g)
        seen: set[str] = set()
        for group in frozen:
            overlap = seen & group
            if overlap:
                raise InvalidParameter(f"ground-truth groups overlap on {sorted(overlap)}")
            seen |= group
        return cls(groups=frozen)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GroundTruthGrouping":
        """Close a set of same-template pairs transitively into groups."""
        pairs = list(pairs)
        ids = sorted({doc_id for pair in pairs for doc_id in pair})
        uf = UnionFind(ids)
        for a, b in pairs:
            uf.union(a, b)
        return cls(groups=tuple(frozenset(c) for c in uf.components()))

    def covered_ids(self) -> frozenset[str]:
        return frozenset(doc_id for group in self.groups for doc_id in group)

    def positive_pairs(self) -> set[tuple[str, str]]:
        out: set[tuple[str, str]] = set()
        for group in self.groups:
            for a, b in combinations(sorted(group), 2):
                out.add((a, b))
        return out


def pairwise_grouping_metrics(predicted: GroupingResult, gt: GroundTruthGrouping) -> tuple[float, float, float]:
    """Precision/recall/F1 over same-group document pairs, restricted to the
    ground truth's coverage.

    No predicted pairs with non-empty ground truth scores (0, 0, 0); both
    empty scores (1, 1, 1).
    """
    covered = gt.covered_ids()
    gt_pairs = gt.positive_pairs()
    predicted_pairs: set[tuple[str, str]] = set()
    for group in predicted.groups:
        members = [m for m in group.members if m in covered]
        for a, b in combinations(members, 2):
            predicted_pairs.add((a, b))

    if not predicted_pairs and not gt_pairs:
        return 1.0, 1.0, 1.0
    hits = len(predicted_pairs & gt_pairs)
    precision = hits / len(predicted_pairs) if predicted_pairs else 0.0
    recall = hits / len(gt_pairs) if gt_pairs else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class TuningRow:
    threshold: float
    precision: float
    recall: float
    f1: float
    selected: bool


def tune_threshold(
    corpus: Corpus,
    gt: GroundTruthGrouping,
    thresholds: Iterable[float],
    metric: str = "question_overlap",
    k: int = 3,
) -> list[TuningRow]:
    """Evaluate the grouping pipeline per threshold against the ground truth.

    The argmax-F1 row is marked selected; F1 ties are broken toward the
    larger threshold (stricter grouping merges less).
    """
    thresholds = sorted(set(thresholds))
    if not thresholds:
        raise InvalidParameter("thresholds must be non-empty")
    for t in thresholds:
        if not 0.0 < t <= 1.0:
            raise InvalidParameter(f"threshold must be in (0, 1], got {t}")

    scored = []
    for t in thresholds:
        result = group_corpus(corpus, metric, t, k)
        precision, recall, f1 = pairwise_grouping_metrics(result, gt)
        scored.append((t, precision, recall, f1))
    best = max(scored, key=lambda row: (row[3], row[0]))[0]
    return [
        TuningRow(threshold=t, precision=p, recall=r, f1=f, selected=t == best)
        for t, p, r, f in scored
    ]


# --- serialization ----------------------------------------------------------


def grouping_to_dict(result: GroupingResult) -> dict:
    return {
        "metric": result.metric,
        "threshold": result.threshold,
        "groups": [{"group_id": g.group_id, "members": list(g.members)} for g in result.groups],
    }


def grouping_from_dict(data: dict) -> GroupingResult:
    groups = [
        TemplateGroup(group_id=item["group_id"], members=tuple(item["members"]))
        for item in data["groups"]
    ]
    return GroupingResult(groups=groups, threshold=data["threshold"], metric=data["metric"])


def grouping_digest(result: GroupingResult) -> str:
    canonical = json.dumps(grouping_to_dict(result), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
