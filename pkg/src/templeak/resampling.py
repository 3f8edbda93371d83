"""Leakage measurement and deterministic group-atomic resampling.

Splits are produced by greedy largest-first deficit packing over template
groups: exact partitioning is NP-hard, while the greedy rule is explainable
and keeps every split within max-group-size documents of its target. All
randomness comes from an in-house splitmix64 stream so identical inputs give
bit-identical manifests on any platform or Python build.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import InfeasibleRatios, InvalidParameter, UnassignedDocument, UnknownDocId
from .grouping import GroupingResult, grouping_digest
from .model import Corpus, Split

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Deficit ties are broken in this order; test wins so the held-out set fills
# first at boundaries.
_TIE_ORDER = (Split.TEST, Split.VAL, Split.TRAIN)


class SplitMix64:
    """Fixed 64-bit generator (splitmix64), identical on every platform."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class Ratios:
    train: float
    val: float
    test: float

    def __post_init__(self):
        parts = (self.train, self.val, self.test)
        if any(r < 0 for r in parts):
            raise InvalidParameter(f"ratios must be >= 0, got {parts}")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise InvalidParameter(f"ratios must sum to 1, got {parts} (sum {sum(parts)})")

    def of(self, split: Split) -> float:
        return {Split.TRAIN: self.train, Split.VAL: self.val, Split.TEST: self.test}[split]


@dataclass
class SplitManifest:
    assignments: dict[str, Split]
    seed: int
    ratios: Ratios

    def members(self, split: Split) -> list[str]:
        return sorted(d for d, s in self.assignments.items() if s == split)


@dataclass
class LeakageReport:
    n_test: int
    n_leaked_test: int
    leak_fraction: float
    leaked_doc_ids: list[str]
    offending_groups: list[int]

    def to_dict(self) -> dict:
        return {
            "n_test": self.n_test,
            "n_leaked_test": self.n_leaked_test,
            "leak_fraction": self.leak_fraction,
            "leaked_doc_ids": self.leaked_doc_ids,
            "offending_groups": self.offending_groups,
        }


@dataclass
class CvFolds:
    folds: list[SplitManifest]


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    group_id: int | None = None
    doc_id: str | None = None
    split: str | None = None


def origin_manifest(corpus: Corpus) -> SplitManifest:
    """View the corpus' original train/test placement as a manifest."""
    assignments: dict[str, Split] = {}
    for doc in corpus.documents:
        if doc.origin_split not in (Split.TRAIN, Split.TEST):
            raise UnassignedDocument(f"document {doc.doc_id!r} has origin_split {doc.origin_split.value!r}")
        assignments[doc.doc_id] = doc.origin_split
    n = len(assignments)
    if n == 0:
        ratios = Ratios(1.0, 0.0, 0.0)
    else:
        n_test = sum(1 for s in assignments.values() if s == Split.TEST)
        ratios = Ratios((n - n_test) / n, 0.0, n_test / n)
    return SplitManifest(assignments=assignments, seed=0, ratios=ratios)


def derived_ratios(corpus: Corpus, train_share: float = 0.8, default_test: float = 0.2) -> Ratios:
    """Default resampling ratios: keep the corpus' original test share.

    test = fraction of documents whose origin split is test (``default_test``
    when any document lacks a train/test origin tag); the remainder is split
    train/val at ``train_share``.
    """
    if not 0.0 < train_share <= 1.0:
        raise InvalidParameter(f"train_share must be in (0, 1], got {train_share}")
    if not 0.0 <= default_test < 1.0:
        raise InvalidParameter(f"default_test must be in [0, 1), got {default_test}")
    n = len(corpus.documents)
    tagged = all(doc.origin_split in (Split.TRAIN, Split.TEST) for doc in corpus.documents)
    if n and tagged:
        test = sum(1 for d in corpus.documents if d.origin_split == Split.TEST) / n
    else:
        test = default_test
    rest = 1.0 - test
    return Ratios(train=train_share * rest, val=(1.0 - train_share) * rest, test=test)


def leakage_report(
    groups: GroupingResult,
    corpus: Corpus,
    assignments: Mapping[str, Split] | None = None,
) -> LeakageReport:
    """Count test documents sharing a template group with training documents.

    With no explicit assignments the documents' origin splits are used (and
    must be train or test). When a resampled manifest is passed, its val
    documents count as the training side: they are seen during training.
    """
    if assignments is None:
        assignments = origin_manifest(corpus).assignments

    group_of = groups.group_of()
    split_of: dict[str, Split] = {}
    for doc_id in corpus.doc_ids():
        if doc_id not in group_of:
            raise UnknownDocId(f"document {doc_id!r} missing from grouping")
        split = assignments.get(doc_id)
        if split is None or split == Split.UNASSIGNED:
            raise UnassignedDocument(f"document {doc_id!r} has no split assignment")
        split_of[doc_id] = split

    leaked: list[str] = []
    offending: set[int] = set()
    n_test = 0
    for group in groups.groups:
        members = [m for m in group.members if m in split_of]
        test_members = [m for m in members if split_of[m] == Split.TEST]
        n_test += len(test_members)
        if not test_members:
            continue
        if any(split_of[m] != Split.TEST for m in members):
            leaked.extend(test_members)
            offending.add(group.group_id)

    leaked.sort()
    fraction = len(leaked) / n_test if n_test else 0.0
    return LeakageReport(
        n_test=n_test,
        n_leaked_test=len(leaked),
        leak_fraction=fraction,
        leaked_doc_ids=leaked,
        offending_groups=sorted(offending),
    )


def _greedy_assign(
    member_sets: list[tuple[str, ...]],
    ratios: Ratios,
    seed: int,
) -> dict[str, Split]:
    """Largest-first deficit packing of whole groups into splits.

    Groups are ordered by (size desc, smallest member asc), then equal-size
    runs are shuffled with the seeded stream; each group goes to the split
    with the largest remaining deficit, ties resolved test, val, train.
    """
    total = sum(len(m) for m in member_sets)
    targets = {split: ratios.of(split) * total for split in _TIE_ORDER}
    if member_sets:
        biggest = max(len(m) for m in member_sets)
        if all(biggest > target for target in targets.values()):
            raise InfeasibleRatios(
                f"a group of {biggest} documents exceeds every split's share of {total} documents"
            )

    ordered = sorted(member_sets, key=lambda m: (-len(m), m[0]))
    rng = SplitMix64(seed)
    shuffled: list[tuple[str, ...]] = []
    start = 0
    while start < len(ordered):
        end = start
        while end < len(ordered) and len(ordered[end]) == len(ordered[start]):
            end += 1
        run = ordered[start:end]
        rng.shuffle(run)
        shuffled.extend(run)
        start = end

    assigned = {split: 0.0 for split in _TIE_ORDER}
    out: dict[str, Split] = {}
    for members in shuffled:
        best = _TIE_ORDER[0]
        best_deficit = targets[best] - assigned[best]
        for split in _TIE_ORDER[1:]:
            deficit = targets[split] - assigned[split]
            if deficit > best_deficit:
                best, best_deficit = split, deficit
        for doc_id in members:
            out[doc_id] = best
        assigned[best] += len(members)
    return out


def resample_splits(groups: GroupingResult, ratios: Ratios, seed: int) -> SplitManifest:
    """Deterministic group-atomic train/val/test assignment.

    No group ever spans two splits; each split lands within max-group-size
    documents of its target.
    """
    member_sets = [group.members for group in groups.groups]
    assignments = _greedy_assign(member_sets, ratios, seed)
    return SplitManifest(assignments=assignments, seed=seed, ratios=ratios)


def make_cv_folds(
    manifest: SplitManifest,
    k: int,
    train_fraction: float,
    seed: int,
    group_atomic: bool = False,
    groups: GroupingResult | None = None,
) -> CvFolds:
    """k independent seeded train/val re-draws of the non-test documents.

    The folds are independent draws, not a disjoint k-fold partition; test
    membership is untouched. With ``group_atomic`` the draw assigns whole
    template groups (``groups`` required), otherwise single documents.
    """
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    if not 0.0 < train_fraction < 1.0:
        raise InvalidParameter(f"train_fraction must be in (0, 1), got {train_fraction}")
    if group_atomic and groups is None:
        raise InvalidParameter("group_atomic folds need a grouping")

    test_docs = manifest.members(Split.TEST)
    pool = sorted(d for d, s in manifest.assignments.items() if s != Split.TEST)
    test_fraction = manifest.ratios.test
    fold_ratios = Ratios(
        train_fraction * (1.0 - test_fraction),
        (1.0 - train_fraction) * (1.0 - test_fraction),
        test_fraction,
    )

    seed_stream = SplitMix64(seed)
    fold_seeds = [seed_stream.next_u64() for _ in range(k)]

    restricted: list[tuple[str, ...]] = []
    if group_atomic:
        pool_set = set(pool)
        for group in groups.groups:
            members = tuple(m for m in group.members if m in pool_set)
            if members:
                restricted.append(members)

    folds = []
    for fold_seed in fold_seeds:
        assignments = {doc_id: Split.TEST for doc_id in test_docs}
        if group_atomic:
            pool_ratios = Ratios(train_fraction, 1.0 - train_fraction, 0.0)
            assignments.update(_greedy_assign(restricted, pool_ratios, fold_seed))
        else:
            shuffled = list(pool)
            SplitMix64(fold_seed).shuffle(shuffled)
            n_train = int(train_fraction * len(shuffled) + 0.5)
            for doc_id in shuffled[:n_train]:
                assignments[doc_id] = Split.TRAIN
            for doc_id in shuffled[n_train:]:
                assignments[doc_id] = Split.VAL
        folds.append(SplitManifest(assignments=assignments, seed=fold_seed, ratios=fold_ratios))
    return CvFolds(folds=folds)


def verify_manifest(manifest: SplitManifest, groups: GroupingResult) -> list[Violation]:
    """Independent check of a manifest against a grouping.

    Reports straddling groups (one violation per test member when the test
    split is involved, one per group otherwise), grouped documents missing
    from the manifest, and any split whose realized size deviates from its
    target by more than the maximum group size.
    """
    violations: list[Violation] = []
    for group in groups.groups:
        splits_seen: dict[Split, list[str]] = {}
        for doc_id in group.members:
            split = manifest.assignments.get(doc_id)
            if split is None:
                violations.append(
                    Violation(
                        kind="unassigned_document",
                        detail=f"document {doc_id!r} (group {group.group_id}) has no assignment",
                        group_id=group.group_id,
                        doc_id=doc_id,
                    )
                )
                continue
            splits_seen.setdefault(split, []).append(doc_id)
        if len(splits_seen) <= 1:
            continue
        breakdown = ", ".join(
            f"{s.value}={sorted(m)}" for s, m in sorted(splits_seen.items(), key=lambda kv: kv[0].value)
        )
        test_members = splits_seen.get(Split.TEST, [])
        if test_members:
            # Each test document of a straddling group is one contaminated
            # measurement, so each gets its own violation.
            for doc_id in sorted(test_members):
                violations.append(
                    Violation(
                        kind="straddling_group",
                        detail=f"test document {doc_id!r} is in group {group.group_id}, which spans: {breakdown}",
                        group_id=group.group_id,
                        doc_id=doc_id,
                        split=Split.TEST.value,
                    )
                )
        else:
            violations.append(
                Violation(
                    kind="straddling_group",
                    detail=f"group {group.group_id} spans {len(splits_seen)} splits: {breakdown}",
                    group_id=group.group_id,
                )
            )

    n = len(manifest.assignments)
    max_group = max((len(g) for g in groups.groups), default=0)
    for split in (Split.TRAIN, Split.VAL, Split.TEST):
        realized = sum(1 for s in manifest.assignments.values() if s == split)
        target = manifest.ratios.of(split) * n
        if abs(realized - target) > max_group:
            violations.append(
                Violation(
                    kind="ratio_deviation",
                    detail=f"{split.value}: realized {realized} vs target {target:.2f} deviates by more than the max group size {max_group}",
                    split=split.value,
                )
            )
    return violations


# --- manifest file format ----------------------------------------------------
#
# Line-oriented, bit-exact across platforms:
#   # seed=42
#   # ratios=train=0.8,val=0.0,test=0.2
#   # grouping_metric=question_overlap
#   # grouping_threshold=0.7
#   # groups_digest=<sha256 of the grouping JSON>
#   doc_id<TAB>split        (sorted by doc_id)


def render_manifest(
    manifest: SplitManifest,
    grouping: GroupingResult | None = None,
    extra_header: Iterable[tuple[str, str]] = (),
) -> str:
    r = manifest.ratios
    lines = [
        f"# seed={manifest.seed}",
        f"# ratios=train={r.train!r},val={r.val!r},test={r.test!r}",
    ]
    if grouping is not None:
        lines.append(f"# grouping_metric={grouping.metric}")
        lines.append(f"# grouping_threshold={grouping.threshold!r}")
        lines.append(f"# groups_digest={grouping_digest(grouping)}")
    for key, value in extra_header:
        lines.append(f"# {key}={value}")
    for doc_id in sorted(manifest.assignments):
        lines.append(f"{doc_id}\t{manifest.assignments[doc_id].value}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> tuple[SplitManifest, dict[str, str]]:
    header: dict[str, str] = {}
    assignments: dict[str, Split] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                header[key.strip()] = value.strip()
            continue
        doc_id, _, split = line.partition("\t")
        if not split:
            raise InvalidParameter(f"bad manifest row: {line!r}")
        assignments[doc_id] = Split(split)

    seed = int(header.get("seed", "0"))
    ratio_parts = {"train": 0.0, "val": 0.0, "test": 0.0}
    if "ratios" in header:
        for piece in header["ratios"].split(","):
            key, _, value = piece.partition("=")
            ratio_parts[key.strip()] = float(value)
    else:
        n = len(assignments) or 1
        for split in (Split.TRAIN, Split.VAL, Split.TEST):
            ratio_parts[split.value] = sum(1 for s in assignments.values() if s == split) / n
    ratios = Ratios(ratio_parts["train"], ratio_parts["val"], ratio_parts["test"])
    return SplitManifest(assignments=assignments, seed=seed, ratios=ratios), header
