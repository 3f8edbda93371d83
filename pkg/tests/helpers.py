"""Document builders, fixture trees, and independent oracles for the tests.

Oracles here deliberately avoid the library's own data structures and
shortcuts (brute-force pair scans, DFS reachability, augmenting-path
matching) so that agreement is evidence, not tautology.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

from templeak.model import (
    BoundingBox,
    Corpus,
    Dataset,
    Document,
    Entity,
    Split,
    Token,
)

BOX = BoundingBox(0, 0, 10, 10)


def make_token(text: str) -> Token:
    return Token(text=text, box=BOX)


def make_entity(entity_id: int, label: str, text: str) -> Entity:
    return Entity(
        entity_id=entity_id,
        label=label,
        text=text,
        tokens=[make_token(w) for w in text.split()],
        links=[],
    )


def make_form_doc(
    doc_id: str,
    questions: list[str],
    answers: list[str] | None = None,
    origin: Split = Split.UNASSIGNED,
    dataset: Dataset = Dataset.FUNSD,
) -> Document:
    entities = []
    for q in questions:
        entities.append(make_entity(len(entities), "question", q))
    for a in answers or []:
        entities.append(make_entity(len(entities), "answer", a))
    tokens = [t for e in entities for t in e.tokens]
    return Document(doc_id=doc_id, dataset=dataset, origin_split=origin, tokens=tokens, entities=entities)


def make_receipt_doc(
    doc_id: str,
    company: str = "",
    address: str = "",
    date: str = "",
    total: str = "",
    origin: Split = Split.UNASSIGNED,
) -> Document:
    entities = []
    for label, value in (("company", company), ("date", date), ("address", address), ("total", total)):
        if value:
            entities.append(make_entity(len(entities), label, value))
    tokens = [t for e in entities for t in e.tokens]
    return Document(doc_id=doc_id, dataset=Dataset.SROIE, origin_split=origin, tokens=tokens, entities=entities)


def make_text_doc(doc_id: str, words: list[str], origin: Split = Split.UNASSIGNED) -> Document:
    return Document(
        doc_id=doc_id,
        dataset=Dataset.GENERIC,
        origin_split=origin,
        tokens=[make_token(w) for w in words],
        entities=[],
    )


def make_corpus(docs: list[Document], dataset: Dataset = Dataset.FUNSD) -> Corpus:
    return Corpus(documents=sorted(docs, key=lambda d: d.doc_id), dataset=dataset)


# --- on-disk fixture trees ----------------------------------------------------


def funsd_json(questions: list[str], answers: list[str] | None = None) -> dict:
    items = []
    for q in questions:
        items.append(
            {
                "id": len(items),
                "text": q,
                "box": [1, 1, 40, 10],
                "label": "question",
                "words": [{"text": w, "box": [1, 1, 20, 10]} for w in q.split()],
                "linking": [],
            }
        )
    for a in answers or []:
        items.append(
            {
                "id": len(items),
                "text": a,
                "box": [1, 12, 40, 20],
                "label": "answer",
                "words": [{"text": w, "box": [1, 12, 20, 20]} for w in a.split()],
                "linking": [],
            }
        )
    return {"form": items}


def write_funsd_tree(
    root: Path,
    train: dict[str, tuple[list[str], list[str]]],
    test: dict[str, tuple[list[str], list[str]]],
) -> Path:
    """Write a FUNSD-shaped tree; values are (questions, answers) per doc."""
    for sub, docs in (("training_data", train), ("testing_data", test)):
        annotations = root / sub / "annotations"
        annotations.mkdir(parents=True, exist_ok=True)
        for doc_id, (questions, answers) in docs.items():
            (annotations / f"{doc_id}.json").write_text(
                json.dumps(funsd_json(questions, answers)), encoding="utf-8"
            )
    return root


def sroie_box_line(text: str, y: int = 0) -> str:
    return f"10,{y},200,{y},200,{y + 20},10,{y + 20},{text}"


def write_sroie_tree(
    root: Path,
    train: dict[str, dict[str, str]],
    test: dict[str, dict[str, str]],
) -> Path:
    """Write an SROIE-shaped tree; values map entity field -> text per doc."""
    for sub, docs in (("training_data", train), ("testing_data", test)):
        box_dir = root / sub / "box"
        ent_dir = root / sub / "entities"
        box_dir.mkdir(parents=True, exist_ok=True)
        ent_dir.mkdir(parents=True, exist_ok=True)
        for doc_id, fields in docs.items():
            lines = [fields[k] for k in ("company", "address", "date", "total") if fields.get(k)]
            (box_dir / f"{doc_id}.txt").write_text(
                "\n".join(sroie_box_line(text, y=24 * i) for i, text in enumerate(lines)),
                encoding="utf-8",
            )
            (ent_dir / f"{doc_id}.txt").write_text(json.dumps(fields), encoding="utf-8")
    return root


# --- independent oracles ------------------------------------------------------


def overlap_bruteforce(a: frozenset[str], b: frozenset[str]) -> float:
    """Count the intersection by scanning all element pairs."""
    hits = sum(1 for x in a for y in b if x == y)
    larger = max(len(a), len(b))
    return hits / larger if larger else 0.0


def components_bruteforce(nodes: list[str], edges: list[tuple[str, str]]) -> set[frozenset[str]]:
    """Connected components by DFS reachability over an adjacency map."""
    adjacency: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    seen: set[str] = set()
    components: set[frozenset[str]] = set()
    for start in nodes:
        if start in seen:
            continue
        stack, reached = [start], set()
        while stack:
            node = stack.pop()
            if node in reached:
                continue
            reached.add(node)
            stack.extend(adjacency[node] - reached)
        seen |= reached
        components.add(frozenset(reached))
    return components


def matching_bruteforce(gold_keys: list, pred_keys: list) -> int:
    """Maximum bipartite matching size (equal keys match) via augmenting paths."""
    match_of_pred: list[int] = [-1] * len(pred_keys)

    def augment(i: int, visited: set[int]) -> bool:
        for j in range(len(pred_keys)):
            if pred_keys[j] != gold_keys[i] or j in visited:
                continue
            visited.add(j)
            if match_of_pred[j] == -1 or augment(match_of_pred[j], visited):
                match_of_pred[j] = i
                return True
        return False

    return sum(1 for i in range(len(gold_keys)) if augment(i, set()))


def f1_bruteforce(gold_keys: list, pred_keys: list) -> tuple[float, float, float, int, int, int]:
    tp = matching_bruteforce(gold_keys, pred_keys)
    fp = len(pred_keys) - tp
    fn = len(gold_keys) - tp
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, tp, fp, fn


# --- random fixtures ----------------------------------------------------------


def random_question_doc(rng: random.Random, doc_id: str, vocab_size: int = 40, max_questions: int = 12) -> Document:
    n = rng.randint(0, max_questions)
    questions = [f"field {rng.randrange(vocab_size)}:" for _ in range(n)]
    return make_form_doc(doc_id, questions)


def random_form_corpus(rng: random.Random, n_docs: int, vocab_size: int = 40) -> Corpus:
    docs = [random_question_doc(rng, f"d{i:03d}", vocab_size) for i in range(n_docs)]
    return make_corpus(docs)


def random_group_structure(rng: random.Random, max_groups: int = 30, max_size: int = 8) -> list[list[str]]:
    """Random disjoint member lists, the raw material for a GroupingResult."""
    n_groups = rng.randint(1, max_groups)
    structure = []
    counter = 0
    for _ in range(n_groups):
        size = rng.randint(1, max_size)
        structure.append([f"doc{counter + j:04d}" for j in range(size)])
        counter += size
    return structure
