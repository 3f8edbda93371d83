"""In-memory document model shared by every stage of the pipeline.

Documents are immutable-in-practice value objects: parsers construct them,
everything downstream only reads. Constructors do not validate, so degenerate
documents can be built in memory and inspected with :func:`validate_document`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Dataset(str, enum.Enum):
    FUNSD = "funsd"
    SROIE = "sroie"
    GENERIC = "generic"


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNASSIGNED = "unassigned"


FUNSD_LABELS = frozenset({"question", "answer", "header", "other"})
SROIE_LABELS = frozenset({"company", "date", "address", "total"})

LABEL_SETS = {Dataset.FUNSD: FUNSD_LABELS, Dataset.SROIE: SROIE_LABELS}


@dataclass(frozen=True)
class BoundingBox:
    x0: int
    y0: int
    x1: int
    y1: int

    def is_valid(self) -> bool:
        return 0 <= self.x0 <= self.x1 and 0 <= self.y0 <= self.y1


@dataclass(frozen=True)
class Token:
    text: str
    box: BoundingBox


@dataclass
class Entity:
    entity_id: int
    label: str
    text: str
    tokens: list[Token] = field(default_factory=list)
    # FUNSD "linking" payload, kept verbatim; nothing downstream interprets it.
    links: list = field(default_factory=list)


@dataclass
class Document:
    doc_id: str
    dataset: Dataset
    origin_split: Split
    tokens: list[Token] = field(default_factory=list)
    entities: list[Entity] = field(default_factory=list)


@dataclass
class Corpus:
    documents: list[Document]
    dataset: Dataset

    def doc_ids(self) -> list[str]:
        return [doc.doc_id for doc in self.documents]

    def by_id(self) -> dict[str, Document]:
        return {doc.doc_id: doc for doc in self.documents}

    def __len__(self) -> int:
        return len(self.documents)


@dataclass(frozen=True)
class Issue:
    """One invariant violation found by :func:`validate_document`."""

    kind: str
    detail: str


def validate_document(doc: Document) -> list[Issue]:
    """Check every document invariant and return the violations as data.

    Returns an empty list for a valid document. Never raises on degenerate
    input.
    """
    issues: list[Issue] = []

    for i, token in enumerate(doc.tokens):
        if not isinstance(token.text, str) or token.text == "":
            issues.append(Issue("empty_token", f"token {i} has empty text"))
        if not token.box.is_valid():
            issues.append(Issue("invalid_box", f"token {i} box {token.box} violates x0<=x1, y0<=y1, >=0"))

    label_set = LABEL_SETS.get(doc.dataset)
    seen_ids: set[int] = set()
    token_identity = {id(t) for t in doc.tokens}
    for entity in doc.entities:
        if entity.entity_id in seen_ids:
            issues.append(Issue("duplicate_entity_id", f"entity_id {entity.entity_id} occurs more than once"))
        seen_ids.add(entity.entity_id)
        if label_set is not None and entity.label not in label_set:
            issues.append(Issue("unknown_label", f"entity {entity.entity_id} label {entity.label!r} not in {sorted(label_set)}"))
        for token in entity.tokens:
            # Identity check first; equal-valued copies are accepted too.
            if id(token) in token_identity or token in doc.tokens:
                continue
            issues.append(Issue("dangling_token", f"entity {entity.entity_id} references token {token.text!r} absent from document tokens"))

    return issues


def validate_corpus(corpus: Corpus) -> list[Issue]:
    issues: list[Issue] = []
    seen: set[str] = set()
    for doc in corpus.documents:
        if doc.doc_id in seen:
            issues.append(Issue("duplicate_doc_id", f"doc_id {doc.doc_id!r} occurs more than once"))
        seen.add(doc.doc_id)
        if doc.dataset != corpus.dataset:
            issues.append(Issue("dataset_mismatch", f"doc {doc.doc_id!r} tagged {doc.dataset.value}, corpus is {corpus.dataset.value}"))
    return issues


# --- canonical serialization ------------------------------------------------
#
# The report form used on disk. Entity tokens are stored as indices into the
# document token list, which both keeps files small and re-establishes the
# "every entity token appears in doc.tokens" invariant on load.


def document_to_dict(doc: Document) -> dict:
    index_of = {id(t): i for i, t in enumerate(doc.tokens)}

    def token_index(token: Token) -> int:
        i = index_of.get(id(token))
        if i is None:
            i = doc.tokens.index(token)  # raises ValueError on dangling tokens
        return i

    return {
        "doc_id": doc.doc_id,
        "dataset": doc.dataset.value,
        "origin_split": doc.origin_split.value,
        "tokens": [{"text": t.text, "box": [t.box.x0, t.box.y0, t.box.x1, t.box.y1]} for t in doc.tokens],
        "entities": [
            {
                "entity_id": e.entity_id,
                "label": e.label,
                "text": e.text,
                "token_ids": [token_index(t) for t in e.tokens],
                "links": e.links,
            }
            for e in doc.entities
        ],
    }


def document_from_dict(data: dict) -> Document:
    tokens = [
        Token(text=item["text"], box=BoundingBox(*item["box"]))
        for item in data["tokens"]
    ]
    entities = [
        Entity(
            entity_id=item["entity_id"],
            label=item["label"],
            text=item["text"],
            tokens=[tokens[i] for i in item["token_ids"]],
            links=item.get("links", []),
        )
        for item in data["entities"]
    ]
    return Document(
        doc_id=data["doc_id"],
        dataset=Dataset(data["dataset"]),
        origin_split=Split(data["origin_split"]),
        tokens=tokens,
        entities=entities,
    )
