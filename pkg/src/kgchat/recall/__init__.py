"""Model-free rough recall of candidate topics from dialogue history.

Three interchangeable algorithms over one topic dictionary:

* ``tfidf``    dictionary-aware longest-match segmentation, stop-word
               filtering, tf*idf scoring, top-n by score
* ``lexical``  longest-match scan in reading order, keep the LAST n distinct
               matches (recency preference; stands in for a lexical analyzer
               with a custom dictionary)
* ``ac``       full multi-pattern automaton scan, distinct matches ranked by
               pattern length, top n

A compiled Cython kernel drives the scans when built; set
``KGCHAT_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..kg import KnowledgeGraph
from .automaton import Automaton, build_automaton

if os.environ.get("KGCHAT_PURE_PYTHON"):
    from . import _scan_py as _kernel

    BACKEND = "python"
else:
    try:
        from . import _scan as _kernel  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _scan_py as _kernel

        BACKEND = "python"

ALGORITHMS = ("tfidf", "lexical", "ac")

# Small built-in stop list; override via build_index(stop_words=...) or a file.
DEFAULT_STOP_WORDS = frozenset(
    """a an the is are was were be been am i you he she it we they this that
    these those of in on at to from and or not no do does did have has had
    what who whom when where why how which with for by as about into over
    under again there here then than too very can will just me my your his
    her its our their out up down so if but""".split()
)


def ac_scan(auto: Automaton, text: str) -> list[tuple[int, int]]:
    """All (end_index, pattern_id) occurrences of the dictionary in ``text``."""
    return _kernel.ac_scan(
        auto.symtab, auto.state_ptr, auto.edge_sym, auto.edge_next,
        auto.fail, auto.out_ptr, auto.out_pat, text,
    )


def longest_scan(auto: Automaton, text: str) -> list[tuple[int, int]]:
    """Greedy longest-match segmentation as (start_index, pattern_id) pairs."""
    return _kernel.longest_scan(
        auto.symtab, auto.state_ptr, auto.edge_sym, auto.edge_next,
        auto.end_pat, auto.pat_len, text,
    )


@dataclass
class RecallIndex:
    algorithm: str
    automaton: Automaton
    stop_words: frozenset[str]
    doc_freq: dict[str, int] = field(default_factory=dict)
    n_docs: int = 0

    @property
    def dictionary(self) -> tuple[str, ...]:
        return self.automaton.patterns

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log((1 + self.n_docs) / (1 + df)) + 1.0


@dataclass
class RecallResult:
    topics: list[str]
    algorithm: str
    elapsed_ms: float = 0.0

    def __iter__(self):
        return iter(self.topics)


def load_stop_words(path: str | Path) -> frozenset[str]:
    words = {w.strip() for w in Path(path).read_text(encoding="utf-8").splitlines()}
    return frozenset(w for w in words if w)


def build_index(
    graph: KnowledgeGraph,
    algorithm: str,
    corpus: list[str] | None = None,
    stop_words: frozenset[str] | None = None,
) -> RecallIndex:
    """Build the recall structures for one algorithm over the graph's topics.

    ``corpus`` (one document string per dialogue) is required for tfidf
    document frequencies; document frequency counts substring containment.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown recall algorithm {algorithm!r}; pick one of {ALGORITHMS}")
    if not graph.topics:
        raise ValueError("recall dictionary is empty")
    auto = build_automaton(list(graph.topics))
    index = RecallIndex(
        algorithm=algorithm,
        automaton=auto,
        stop_words=stop_words if stop_words is not None else DEFAULT_STOP_WORDS,
    )
    if algorithm == "tfidf":
        if not corpus:
            raise ValueError("tfidf recall needs a corpus for document frequencies")
        index.n_docs = len(corpus)
        for doc in corpus:
            for pid in {p for _, p in ac_scan(auto, doc)}:
                term = auto.patterns[pid]
                index.doc_freq[term] = index.doc_freq.get(term, 0) + 1
    return index


def recall_tfidf(index: RecallIndex, history: str, n: int) -> RecallResult:
    """Top-n dictionary terms by tf*idf over the segmented history."""
    t0 = time.perf_counter()
    counts: dict[str, int] = {}
    for _, pid in longest_scan(index.automaton, history):
        term = index.automaton.patterns[pid]
        if term.lower() in index.stop_words:
            continue
        counts[term] = counts.get(term, 0) + 1
    scored = sorted(counts.items(), key=lambda kv: (-kv[1] * index.idf(kv[0]), kv[0]))
    topics = [term for term, _ in scored[:n]]
    return RecallResult(topics, "tfidf", (time.perf_counter() - t0) * 1e3)


def recall_lexical(index: RecallIndex, history: str, n: int) -> RecallResult:
    """Last n distinct longest-match hits, in order of occurrence."""
    t0 = time.perf_counter()
    last_pos: dict[str, int] = {}
    for start, pid in longest_scan(index.automaton, history):
        last_pos[index.automaton.patterns[pid]] = start
    ordered = sorted(last_pos, key=last_pos.get)
    topics = ordered[-n:] if n > 0 else []
    return RecallResult(topics, "lexical", (time.perf_counter() - t0) * 1e3)


def recall_aho_corasick(index: RecallIndex, history: str, n: int) -> RecallResult:
    """Distinct automaton matches sorted longest-first, top n."""
    t0 = time.perf_counter()
    last_end: dict[int, int] = {}
    for end, pid in ac_scan(index.automaton, history):
        last_end[pid] = end
    order = sorted(last_end, key=lambda pid: (-int(index.automaton.pat_len[pid]), last_end[pid]))
    topics = [index.automaton.patterns[pid] for pid in order[:n]]
    return RecallResult(topics, "ac", (time.perf_counter() - t0) * 1e3)


_RECALL_FNS = {"tfidf": recall_tfidf, "lexical": recall_lexical, "ac": recall_aho_corasick}


def recall(index: RecallIndex, history: str, n: int) -> RecallResult:
    return _RECALL_FNS[index.algorithm](index, history, n)


def recall_accuracy(index: RecallIndex, samples: list[tuple[str, str]], n: int) -> float:
    """Percent of samples whose top-n recall contains the gold topic."""
    if not samples:
        raise ValueError("recall_accuracy needs at least one sample")
    hits = sum(1 for history, gold in samples if gold in recall(index, history, n).topics)
    return hits / len(samples) * 100.0


def accuracy_curve(index: RecallIndex, samples: list[tuple[str, str]], n_max: int = 50) -> list[float]:
    """accuracy(n) for n = 1..n_max in one pass.

    Result lists nest as n grows -- as prefixes for tfidf/ac, as suffixes for
    lexical (last-n rule) -- so one full recall per sample gives the minimal n
    at which the gold topic appears.
    """
    if not samples:
        raise ValueError("accuracy_curve needs at least one sample")
    hits_at = [0] * (n_max + 1)
    for history, gold in samples:
        topics = recall(index, history, n_max).topics
        try:
            idx = topics.index(gold)
        except ValueError:
            continue
        rank = len(topics) - idx if index.algorithm == "lexical" else idx + 1
        hits_at[rank] += 1
    curve = []
    running = 0
    for n in range(1, n_max + 1):
        running += hits_at[n]
        curve.append(running / len(samples) * 100.0)
    return curve
