"""Parsers for FUNSD-style and SROIE-style annotation trees.

Expected layout under a dataset root:

* FUNSD:  ``<root>/training_data/annotations/*.json`` and
  ``<root>/testing_data/annotations/*.json``, one JSON object per page.
* SROIE:  ``<root>/<split>/box/*.txt`` (OCR lines) paired by file stem with
  ``<root>/<split>/entities/*.txt`` (JSON object of labelled fields), where
  ``<split>`` is ``training_data`` or ``testing_data``.

The split a document belongs to comes from its directory, never from file
content. Parsing a single file is pure; :func:`load_corpus` merges per-file
results into a doc_id-sorted corpus, so directory listing order is irrelevant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateDocId, MalformedAnnotation, MalformedOcrLine, UnknownLabel
from .model import (
    BoundingBox,
    Corpus,
    Dataset,
    Document,
    Entity,
    FUNSD_LABELS,
    SROIE_LABELS,
    Split,
    Token,
)

SPLIT_DIRS = (("training_data", Split.TRAIN), ("testing_data", Split.TEST))


@dataclass
class LoadError:
    path: str
    kind: str
    detail: str


@dataclass
class LoadReport:
    """Aggregated outcome of a corpus load."""

    documents: int = 0
    dropped_lines: int = 0
    errors: list[LoadError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add_error(self, path: Path | str, kind: str, detail: str) -> None:
        self.errors.append(LoadError(str(path), kind, detail))

    def to_dict(self) -> dict:
        return {
            "documents": self.documents,
            "dropped_lines": self.dropped_lines,
            "errors": [{"path": e.path, "kind": e.kind, "detail": e.detail} for e in self.errors],
            "warnings": list(self.warnings),
        }


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, bytes):
        return raw.decode("utf-8", errors="replace")
    return raw


def _parse_box(value, where: str) -> BoundingBox:
    if not isinstance(value, list) or len(value) != 4:
        raise MalformedAnnotation(f"{where}: box must be a list of 4 integers, got {value!r}")
    for coord in value:
        if not isinstance(coord, int) or isinstance(coord, bool):
            raise MalformedAnnotation(f"{where}: box coordinate {coord!r} is not an integer")
    box = BoundingBox(*value)
    if not box.is_valid():
        raise MalformedAnnotation(f"{where}: box {value} violates x0<=x1, y0<=y1, coords>=0")
    return box


def parse_funsd_document(
    raw: bytes | str,
    doc_id: str,
    origin_split: Split = Split.UNASSIGNED,
    report: LoadReport | None = None,
) -> Document:
    """Parse one FUNSD annotation object into a Document.

    One entity per ``form`` item; tokens are the items' words in file order.
    Words with empty text are dropped (counted in the report when given).
    """
    try:
        data = json.loads(_decode(raw))
    except json.JSONDecodeError as exc:
        raise MalformedAnnotation(f"{doc_id}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict) or "form" not in data:
        raise MalformedAnnotation(f"{doc_id}: missing top-level 'form' key")
    items = data["form"]
    if not isinstance(items, list):
        raise MalformedAnnotation(f"{doc_id}: 'form' is not a list")

    tokens: list[Token] = []
    entities: list[Entity] = []
    seen_ids: set[int] = set()
    for i, item in enumerate(items):
        where = f"{doc_id} form[{i}]"
        if not isinstance(item, dict):
            raise MalformedAnnotation(f"{where}: item is not an object")
        for key in ("id", "text", "box", "label", "words", "linking"):
            if key not in item:
                raise MalformedAnnotation(f"{where}: missing key {key!r}")
        label = item["label"]
        if not isinstance(label, str) or label.lower() not in FUNSD_LABELS:
            raise UnknownLabel(f"{where}: label {label!r} not in {sorted(FUNSD_LABELS)}")
        if not isinstance(item["text"], str):
            raise MalformedAnnotation(f"{where}: 'text' is not a string")
        entity_id = item["id"]
        if not isinstance(entity_id, int) or isinstance(entity_id, bool):
            raise MalformedAnnotation(f"{where}: 'id' is not an integer")
        if entity_id in seen_ids:
            raise MalformedAnnotation(f"{where}: duplicate entity id {entity_id}")
        seen_ids.add(entity_id)
        _parse_box(item["box"], where)  # entity-level box is validated, tokens carry their own
        if not isinstance(item["linking"], list):
            raise MalformedAnnotation(f"{where}: 'linking' is not a list")
        words = item["words"]
        if not isinstance(words, list):
            raise MalformedAnnotation(f"{where}: 'words' is not a list")

        entity_tokens: list[Token] = []
        for j, word in enumerate(words):
            wwhere = f"{where} words[{j}]"
            if not isinstance(word, dict) or "text" not in word or "box" not in word:
                raise MalformedAnnotation(f"{wwhere}: word needs 'text' and 'box'")
            if not isinstance(word["text"], str):
                raise MalformedAnnotation(f"{wwhere}: word text is not a string")
            if word["text"] == "":
                if report is not None:
                    report.dropped_lines += 1
                continue
            entity_tokens.append(Token(text=word["text"], box=_parse_box(word["box"], wwhere)))

        tokens.extend(entity_tokens)
        entities.append(
            Entity(
                entity_id=entity_id,
                label=label.lower(),
                text=item["text"],
                tokens=entity_tokens,
                links=item["linking"],
            )
        )

    return Document(doc_id=doc_id, dataset=Dataset.FUNSD, origin_split=origin_split, tokens=tokens, entities=entities)


def parse_sroie_document(
    ocr_raw: bytes | str,
    entities_raw: bytes | str,
    doc_id: str,
    origin_split: Split = Split.UNASSIGNED,
    report: LoadReport | None = None,
) -> Document:
    """Parse one SROIE receipt from its OCR box file and entities file.

    Each OCR line is ``x1,y1,x2,y2,x3,y3,x4,y4,text``: exactly the first 8
    comma-separated fields are quadrilateral corner coordinates, everything
    after the 8th comma is kept verbatim as the transcription (it may itself
    contain commas). The token box is the axis-aligned hull of the corners.
    Blank lines and zero-length transcriptions are dropped silently.
    """
    tokens: list[Token] = []
    for lineno, line in enumerate(_decode(ocr_raw).splitlines(), start=1):
        if line.strip() == "":
            if report is not None:
                report.dropped_lines += 1
            continue
        parts = line.split(",", 8)
        if len(parts) < 8:
            raise MalformedOcrLine(f"{doc_id} line {lineno}: expected 8 leading coordinate fields, got {len(parts)}")
        try:
            coords = [int(p) for p in parts[:8]]
        except ValueError as exc:
            raise MalformedOcrLine(f"{doc_id} line {lineno}: non-integer coordinate ({exc})") from exc
        text = parts[8] if len(parts) > 8 else ""
        if text == "":
            if report is not None:
                report.dropped_lines += 1
            continue
        xs = coords[0::2]
        ys = coords[1::2]
        # Hulls occasionally spill a pixel negative in real OCR output; clamp.
        box = BoundingBox(max(min(xs), 0), max(min(ys), 0), max(max(xs), 0), max(max(ys), 0))
        tokens.append(Token(text=text, box=box))

    try:
        fields = json.loads(_decode(entities_raw))
    except json.JSONDecodeError as exc:
        raise MalformedAnnotation(f"{doc_id}: entities file is not valid JSON ({exc})") from exc
    if not isinstance(fields, dict):
        raise MalformedAnnotation(f"{doc_id}: entities file is not a JSON object")

    entities: list[Entity] = []
    next_id = 0
    for label in ("company", "date", "address", "total"):  # unknown extra keys are ignored
        if label not in fields:
            continue
        value = fields[label]
        if not isinstance(value, str):
            raise MalformedAnnotation(f"{doc_id}: entity {label!r} value {value!r} is not a string")
        entities.append(Entity(entity_id=next_id, label=label, text=value))
        next_id += 1

    return Document(doc_id=doc_id, dataset=Dataset.SROIE, origin_split=origin_split, tokens=tokens, entities=entities)


def _iter_funsd_files(root: Path):
    for dirname, split in SPLIT_DIRS:
        yield split, root / dirname / "annotations", "*.json"


def _load_funsd(root: Path, report: LoadReport) -> list[Document]:
    docs: list[Document] = []
    for split, directory, pattern in _iter_funsd_files(root):
        if not directory.is_dir():
            report.warnings.append(f"split directory not found: {directory}")
            continue
        for path in sorted(directory.glob(pattern)):
            try:
                docs.append(parse_funsd_document(path.read_bytes(), path.stem, split, report))
            except (MalformedAnnotation, UnknownLabel) as exc:
                report.add_error(path, type(exc).__name__, str(exc))
    return docs


def _load_sroie(root: Path, report: LoadReport) -> list[Document]:
    docs: list[Document] = []
    for dirname, split in SPLIT_DIRS:
        box_dir = root / dirname / "box"
        ent_dir = root / dirname / "entities"
        if not box_dir.is_dir():
            report.warnings.append(f"split directory not found: {box_dir}")
            continue
        box_files = {p.stem: p for p in sorted(box_dir.glob("*.txt"))}
        have_entities = ent_dir.is_dir()
        if have_entities:
            for path in sorted(ent_dir.glob("*.txt")):
                if path.stem not in box_files:
                    report.warnings.append(f"entities file without OCR file: {path}")
        else:
            report.warnings.append(f"entities directory not found: {ent_dir}")
        for stem in sorted(box_files):
            ent_path = ent_dir / f"{stem}.txt"
            if have_entities and ent_path.is_file():
                entities_raw: bytes | str = ent_path.read_bytes()
            else:
                if have_entities:
                    report.warnings.append(f"no entities file for {box_files[stem]}")
                entities_raw = "{}"
            try:
                docs.append(parse_sroie_document(box_files[stem].read_bytes(), entities_raw, stem, split, report))
            except (MalformedAnnotation, MalformedOcrLine) as exc:
                report.add_error(box_files[stem], type(exc).__name__, str(exc))
    return docs


def load_corpus(root: Path | str, dataset: Dataset, report: LoadReport | None = None) -> Corpus:
    """Load every document under ``root`` into a doc_id-sorted Corpus.

    Per-file parse failures are recorded in ``report`` (when given) and the
    offending file is skipped; a missing root raises FileNotFoundError and a
    duplicate document id raises DuplicateDocId.
    """
    root = Path(root)
    if report is None:
        report = LoadReport()
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")

    if dataset == Dataset.FUNSD:
        docs = _load_funsd(root, report)
    elif dataset == Dataset.SROIE:
        docs = _load_sroie(root, report)
    else:
        raise MalformedAnnotation(f"no loader for dataset {dataset.value!r}")

    seen: dict[str, str] = {}
    for doc in docs:
        if doc.doc_id in seen:
            raise DuplicateDocId(f"doc_id {doc.doc_id!r} produced by more than one file")
        seen[doc.doc_id] = doc.doc_id
    docs.sort(key=lambda d: d.doc_id)

    if not docs:
        report.warnings.append(f"no documents found under {root}")
    report.documents = len(docs)
    return Corpus(documents=docs, dataset=dataset)
