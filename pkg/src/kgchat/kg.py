"""Knowledge graph store: loading, validation, indexing, and candidate lookup.

The graph file format is a UTF-8 JSON array of records
``{"name": <topic>, "kb": [[head, relation, tail], ...]}``. KdConv-style
knowledge files load without transformation. Topics are the record names
(root nodes); entities that only appear as triple heads or tails are
registered but own no record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class GraphFormatError(ValueError):
    """Raised when a knowledge file fails to parse or validate."""


@dataclass(frozen=True)
class KnowledgeTriple:
    head: str
    relation: str
    tail: str

    def text(self) -> str:
        """Render as plain text for matching/generation: fields joined by single spaces."""
        return f"{self.head} {self.relation} {self.tail}"


@dataclass(frozen=True)
class TopicSet:
    """An ordered, duplicate-free collection of topic names with a provenance tag."""

    names: tuple[str, ...]
    origin: str = "rough-recall"  # rough-recall | memory | expansion

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("TopicSet names must be unique")

    def __iter__(self):
        return iter(self.names)

    def __len__(self):
        return len(self.names)


@dataclass
class CandidatePool:
    """Knowledge candidates recalled for a topic set, plus skipped-topic bookkeeping."""

    triples: list[KnowledgeTriple]
    skipped_topics: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.triples)


class KnowledgeGraph:
    """Immutable-after-load store of topics and (head, relation, tail) triples.

    ``records`` preserves the file structure (one entry per topic, in file
    order) so that save_graph round-trips exactly; ``topic_index`` maps every
    head name to the indices of its triples.
    """

    def __init__(self, records: list[tuple[str, list[KnowledgeTriple]]]):
        if not records:
            raise GraphFormatError("graph must declare at least one topic")
        names = [name for name, _ in records]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise GraphFormatError(f"duplicate topic names: {dupes}")
        self.records: tuple[tuple[str, tuple[KnowledgeTriple, ...]], ...] = tuple(
            (name, tuple(kb)) for name, kb in records
        )
        self.topics: tuple[str, ...] = tuple(names)
        self.triples: tuple[KnowledgeTriple, ...] = tuple(tr for _, kb in self.records for tr in kb)
        self._topic_set = frozenset(names)
        self._topic_ids = {name: i for i, name in enumerate(names)}
        # head -> indices into self.triples, file order preserved
        self.topic_index: dict[str, list[int]] = {t: [] for t in names}
        self.entities: set[str] = set(names)
        for i, tr in enumerate(self.triples):
            self.topic_index.setdefault(tr.head, []).append(i)
            self.entities.add(tr.head)
            self.entities.add(tr.tail)

    @classmethod
    def from_triples(cls, topics: list[str], triples: list[KnowledgeTriple]) -> "KnowledgeGraph":
        """Build a graph by grouping triples under their heads (test/synthetic helper)."""
        by_head: dict[str, list[KnowledgeTriple]] = {t: [] for t in topics}
        for tr in triples:
            by_head.setdefault(tr.head, []).append(tr)
        extra = [h for h in by_head if h not in topics]
        return cls([(t, by_head[t]) for t in list(topics) + extra])

    def __len__(self):
        return len(self.triples)

    def is_topic(self, name: str) -> bool:
        return name in self._topic_set

    def triples_for(self, name: str) -> list[KnowledgeTriple]:
        return [self.triples[i] for i in self.topic_index.get(name, [])]

    def topic_id(self, name: str) -> int:
        return self._topic_ids[name]


def _clean_field(value, record_idx: int, what: str) -> str:
    if not isinstance(value, str):
        raise GraphFormatError(f"record {record_idx}: {what} must be a string, got {type(value).__name__}")
    value = value.strip()
    if not value:
        raise GraphFormatError(f"record {record_idx}: {what} is empty after trimming")
    return value


def load_graph(path: str | Path) -> KnowledgeGraph:
    """Load and validate a knowledge JSON file. Idempotent; raises GraphFormatError."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    if isinstance(raw, dict):
        # tolerate the mapping shape {topic: [[head, relation, tail], ...]}
        raw = [{"name": name, "kb": kb} for name, kb in raw.items()]
    if not isinstance(raw, list):
        raise GraphFormatError(f"{path}: top level must be an array of topic records")

    records: list[tuple[str, list[KnowledgeTriple]]] = []
    for idx, record in enumerate(raw):
        if not isinstance(record, dict) or "name" not in record:
            raise GraphFormatError(f"record {idx}: expected object with a 'name' field")
        name = _clean_field(record["name"], idx, "topic name")
        kb: list[KnowledgeTriple] = []
        for tr in record.get("kb", []):
            if not isinstance(tr, (list, tuple)) or len(tr) != 3:
                raise GraphFormatError(f"record {idx} ({name}): kb entries must be [head, relation, tail]")
            kb.append(
                KnowledgeTriple(
                    _clean_field(tr[0], idx, "triple head"),
                    _clean_field(tr[1], idx, "triple relation"),
                    _clean_field(tr[2], idx, "triple tail"),
                )
            )
        records.append((name, kb))
    return KnowledgeGraph(records)


def save_graph(graph: KnowledgeGraph, path: str | Path) -> None:
    """Serialize back to the knowledge JSON format (round-trips with load_graph)."""
    out = [
        {"name": name, "kb": [[t.head, t.relation, t.tail] for t in kb]}
        for name, kb in graph.records
    ]
    Path(path).write_text(json.dumps(out, ensure_ascii=False, indent=1), encoding="utf-8")


def knowledge_for_topics(graph: KnowledgeGraph, topics: TopicSet | list[str]) -> CandidatePool:
    """Union of triples headed by each topic, in topic order then file order.

    Unknown topics are skipped and reported in the pool metadata rather than
    raising, so recall noise cannot take a turn down.
    """
    pool = CandidatePool(triples=[])
    seen: set[KnowledgeTriple] = set()
    for name in topics:
        if name not in graph.topic_index:
            pool.skipped_topics.append(name)
            continue
        for i in graph.topic_index[name]:
            tr = graph.triples[i]
            if tr not in seen:
                seen.add(tr)
                pool.triples.append(tr)
    return pool


def expand_related_topics(graph: KnowledgeGraph, topics: TopicSet) -> TopicSet:
    """One-hop expansion: add tails of the input topics' triples that are themselves topics.

    Input order is preserved and expansions are appended; the hop is not
    transitive (a chain A -> B -> C contributes B but not C).
    """
    out: list[str] = list(topics.names)
    present = set(out)
    for name in topics:
        for i in graph.topic_index.get(name, []):
            tail = graph.triples[i].tail
            if graph.is_topic(tail) and tail not in present:
                present.add(tail)
                out.append(tail)
    return TopicSet(names=tuple(out), origin="expansion")
