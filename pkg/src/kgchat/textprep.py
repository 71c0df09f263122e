"""Tokenization, history windowing, and training-set reconstruction.

Tokenization is character-level for CJK text and whitespace-split elsewhere,
so no external segmenter is needed. Three dataset families are rebuilt from a
dialogue corpus plus the knowledge graph:

* topic samples       -- (history, gold topic id), one per annotated reply turn
* matching samples    -- (history, knowledge, 0/1) at a 1:4 positive:negative ratio
* generation samples  -- (history, knowledge, reply, p) at 1:1 with suitability labels

Dialogue corpus format: JSON array of ``{"messages": [{"message": str,
"attrs": [{"name", "attrname", "attrvalue"}]?}]}`` (KdConv-compatible).
Dataset files are JSON-lines, one sample per line.
"""

from __future__ import annotations

import json
import random
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .kg import KnowledgeGraph, KnowledgeTriple

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPEAKER1, SPEAKER2, BOS, EOS = "[speaker1]", "[speaker2]", "[BOS]", "[EOS]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, SPEAKER1, SPEAKER2, BOS, EOS)

_CJK_RANGES = (
    (0x3000, 0x303F),   # CJK punctuation
    (0x3040, 0x30FF),   # kana
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),   # hangul
    (0xF900, 0xFAFF),
    (0xFF00, 0xFFEF),   # fullwidth forms
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> list[str]:
    """Split into tokens: one per CJK character, whitespace-delimited otherwise."""
    text = unicodedata.normalize("NFC", text)
    out: list[str] = []
    buf: list[str] = []
    for ch in text:
        if ch.isspace():
            if buf:
                out.append("".join(buf))
                buf = []
        elif _is_cjk(ch):
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


class Tokenizer:
    """Frozen vocabulary with the eight special tokens at fixed low ids."""

    def __init__(self, tokens: list[str]):
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicates")
        self.tokens = list(tokens)
        self.ids = {t: i for i, t in enumerate(tokens)}
        self.pad_id = self.ids[PAD]
        self.unk_id = self.ids[UNK]
        self.cls_id = self.ids[CLS]
        self.sep_id = self.ids[SEP]
        self.speaker1_id = self.ids[SPEAKER1]
        self.speaker2_id = self.ids[SPEAKER2]
        self.bos_id = self.ids[BOS]
        self.eos_id = self.ids[EOS]

    def __len__(self):
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.ids.get(tok, self.unk_id) for tok in tokenize(text)]

    def decode(self, ids, skip_special: bool = True) -> str:
        parts: list[str] = []
        for i in ids:
            tok = self.tokens[i]
            if skip_special and tok in SPECIAL_TOKENS:
                continue
            # join with spaces except between adjacent CJK characters
            if parts and not (_is_cjk(tok[0]) and _is_cjk(parts[-1][-1])):
                parts.append(" ")
            parts.append(tok)
        return "".join(parts)

    def save(self, path: str | Path) -> None:
        payload = {"version": 1, "tokens": self.tokens}
        Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=0), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Tokenizer":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(payload["tokens"])


def build_vocab(corpus, min_count: int = 1) -> Tokenizer:
    """Count tokens over an iterable of texts; ids are frequency-desc then lexicographic."""
    counts: Counter[str] = Counter()
    n_texts = 0
    for text in corpus:
        n_texts += 1
        counts.update(tokenize(text))
    if n_texts == 0 or not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count and tok not in SPECIAL_TOKENS),
        key=lambda t: (-counts[t], t),
    )
    return Tokenizer(list(SPECIAL_TOKENS) + kept)


def encode_history(tokenizer: Tokenizer, history: list[str], max_sent: int = 10, max_len: int = 400) -> list[int]:
    """Encode a dialogue history for the classifier/matcher.

    Keeps the last ``max_sent`` utterances, each followed by [SEP], with a
    leading [CLS]. Over-length sequences are truncated from the front so the
    newest utterance always survives intact.
    """
    if not history:
        raise ValueError("history must contain at least one utterance")
    body: list[int] = []
    for utt in history[-max_sent:]:
        body.extend(tokenizer.encode(utt))
        body.append(tokenizer.sep_id)
    if len(body) > max_len - 1:
        body = body[-(max_len - 1):]
    return [tokenizer.cls_id] + body


def history_window_text(history: list[str], max_sent: int = 10) -> str:
    """Raw text of the last ``max_sent`` utterances, for the recall algorithms."""
    return " ".join(history[-max_sent:])


# --------------------------------------------------------------------------
# Dialogue corpus
# --------------------------------------------------------------------------

@dataclass
class Message:
    text: str
    attrs: list[KnowledgeTriple] = field(default_factory=list)


@dataclass
class Dialogue:
    messages: list[Message]


def load_corpus(path: str | Path) -> list[Dialogue]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    dialogues = []
    for rec in raw:
        messages = []
        for msg in rec["messages"]:
            attrs = [
                KnowledgeTriple(a["name"], a["attrname"], str(a["attrvalue"]))
                for a in msg.get("attrs", [])
            ]
            messages.append(Message(text=msg["message"], attrs=attrs))
        dialogues.append(Dialogue(messages=messages))
    return dialogues


def save_corpus(dialogues: list[Dialogue], path: str | Path) -> None:
    out = []
    for d in dialogues:
        msgs = []
        for m in d.messages:
            rec = {"message": m.text}
            if m.attrs:
                rec["attrs"] = [
                    {"name": t.head, "attrname": t.relation, "attrvalue": t.tail} for t in m.attrs
                ]
            msgs.append(rec)
        out.append({"messages": msgs})
    Path(path).write_text(json.dumps(out, ensure_ascii=False, indent=1), encoding="utf-8")


def gold_topic(message: Message, graph: KnowledgeGraph) -> str | None:
    """Topic grounding a reply: the first attr head that is a graph topic."""
    for tr in message.attrs:
        if graph.is_topic(tr.head):
            return tr.head
    return None


# --------------------------------------------------------------------------
# Dataset families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TopicSample:
    history: tuple[int, ...]
    label: int


@dataclass(frozen=True)
class MatchSample:
    history: tuple[int, ...]
    knowledge: tuple[int, ...]
    label: int


@dataclass(frozen=True)
class GenSample:
    history: tuple[tuple[int, ...], ...]   # per-utterance token ids, oldest first
    knowledge: tuple[tuple[int, ...], ...]  # per-triple token ids
    reply: tuple[int, ...]
    label: int                              # 1 = suitable reply, 0 = sampled negative


@dataclass
class TopicDataset:
    samples: list[TopicSample]
    skipped_turns: int = 0


@dataclass
class MatchDataset:
    samples: list[MatchSample]
    shortfall: int = 0

    def counts(self) -> tuple[int, int]:
        pos = sum(1 for s in self.samples if s.label == 1)
        return pos, len(self.samples) - pos


@dataclass
class GenDataset:
    samples: list[GenSample]
    single_dialogue_fallback: bool = False


def _reply_turns(dialogue: Dialogue, graph: KnowledgeGraph):
    """Yield (turn index, gold topic, gold triples) for annotated reply positions."""
    for i in range(1, len(dialogue.messages)):
        msg = dialogue.messages[i]
        topic = gold_topic(msg, graph)
        if topic is None:
            continue
        yield i, topic, list(msg.attrs)


def build_topic_samples(
    corpus: list[Dialogue],
    graph: KnowledgeGraph,
    tokenizer: Tokenizer,
    max_sent: int = 10,
    max_len: int = 400,
) -> TopicDataset:
    """One sample per annotated reply turn: history up to the turn, topic label."""
    ds = TopicDataset(samples=[])
    for dlg in corpus:
        annotated = {i for i, _, _ in _reply_turns(dlg, graph)}
        for i in range(1, len(dlg.messages)):
            if i not in annotated:
                ds.skipped_turns += 1
                continue
            topic = gold_topic(dlg.messages[i], graph)
            history = [m.text for m in dlg.messages[:i]]
            ds.samples.append(
                TopicSample(
                    history=tuple(encode_history(tokenizer, history, max_sent, max_len)),
                    label=graph.topic_id(topic),
                )
            )
    return ds


def encode_knowledge(tokenizer: Tokenizer, triple: KnowledgeTriple, max_len: int = 400) -> list[int]:
    """Matcher-side encoding of one triple: [CLS] head relation tail [SEP]."""
    body = tokenizer.encode(triple.text())[: max_len - 2]
    return [tokenizer.cls_id] + body + [tokenizer.sep_id]


def build_matching_samples(
    corpus: list[Dialogue],
    graph: KnowledgeGraph,
    tokenizer: Tokenizer,
    neg_ratio: int = 4,
    seed: int = 0,
    max_sent: int = 10,
    max_len: int = 400,
) -> MatchDataset:
    """Per gold triple, one positive plus ``neg_ratio`` sampled negatives.

    Negatives prefer same-topic distractors and fall back to the global triple
    pool; when both pools run dry the shortfall is recorded instead of padded.
    """
    rng = random.Random(seed)
    ds = MatchDataset(samples=[])
    for dlg in corpus:
        for i, topic, gold in _reply_turns(dlg, graph):
            history = tuple(
                encode_history(tokenizer, [m.text for m in dlg.messages[:i]], max_sent, max_len)
            )
            gold_set = set(gold)
            same_topic = [t for t in graph.triples_for(topic) if t not in gold_set]
            global_pool = [t for t in graph.triples if t not in gold_set]
            for tr in gold:
                ds.samples.append(
                    MatchSample(history=history, knowledge=tuple(encode_knowledge(tokenizer, tr, max_len)), label=1)
                )
                negatives = list(same_topic)
                if len(negatives) < neg_ratio:
                    extra = [t for t in global_pool if t not in set(negatives)]
                    take = min(neg_ratio - len(negatives), len(extra))
                    negatives.extend(rng.sample(extra, take) if take else [])
                    picked = negatives
                else:
                    picked = rng.sample(negatives, neg_ratio)
                if len(picked) > neg_ratio:
                    picked = picked[:neg_ratio]
                ds.shortfall += neg_ratio - len(picked)
                for neg in picked:
                    ds.samples.append(
                        MatchSample(
                            history=history,
                            knowledge=tuple(encode_knowledge(tokenizer, neg, max_len)),
                            label=0,
                        )
                    )
    return ds


def build_generation_samples(
    corpus: list[Dialogue],
    graph: KnowledgeGraph,
    tokenizer: Tokenizer,
    seed: int = 0,
    max_sent: int = 10,
) -> GenDataset:
    """Each gold (history, knowledge, reply) yields one positive and one negative.

    The negative keeps history and knowledge but swaps in a reply drawn from a
    different dialogue (other turns of the same dialogue only when the corpus
    has a single dialogue, in which case the dataset is flagged).
    """
    rng = random.Random(seed)
    ds = GenDataset(samples=[])
    reply_pool: list[tuple[int, str]] = []  # (dialogue index, reply text)
    for d_idx, dlg in enumerate(corpus):
        for i, _, _ in _reply_turns(dlg, graph):
            reply_pool.append((d_idx, dlg.messages[i].text))

    for d_idx, dlg in enumerate(corpus):
        for i, _, gold in _reply_turns(dlg, graph):
            history = tuple(
                tuple(tokenizer.encode(m.text)) for m in dlg.messages[max(0, i - max_sent): i]
            )
            knowledge = tuple(tuple(tokenizer.encode(t.text())) for t in gold)
            reply = tuple(tokenizer.encode(dlg.messages[i].text))
            ds.samples.append(GenSample(history=history, knowledge=knowledge, reply=reply, label=1))

            candidates = [r for d, r in reply_pool if d != d_idx and r != dlg.messages[i].text]
            if not candidates:
                ds.single_dialogue_fallback = True
                candidates = [r for _, r in reply_pool if r != dlg.messages[i].text]
            if not candidates:
                continue  # nothing distinct to sample; positive stands alone
            neg_reply = rng.choice(candidates)
            ds.samples.append(
                GenSample(
                    history=history,
                    knowledge=knowledge,
                    reply=tuple(tokenizer.encode(neg_reply)),
                    label=0,
                )
            )
    return ds


# --------------------------------------------------------------------------
# JSON-lines serialization
# --------------------------------------------------------------------------

def write_jsonl(path: str | Path, samples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(_sample_dict(s), ensure_ascii=False) + "\n")


def _sample_dict(s) -> dict:
    if isinstance(s, TopicSample):
        return {"kind": "topic", "history": list(s.history), "label": s.label}
    if isinstance(s, MatchSample):
        return {"kind": "match", "history": list(s.history), "knowledge": list(s.knowledge), "label": s.label}
    if isinstance(s, GenSample):
        return {
            "kind": "gen",
            "history": [list(u) for u in s.history],
            "knowledge": [list(k) for k in s.knowledge],
            "reply": list(s.reply),
            "label": s.label,
        }
    raise TypeError(f"unknown sample type {type(s)!r}")


def read_jsonl(path: str | Path):
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            kind = rec.pop("kind")
            if kind == "topic":
                samples.append(TopicSample(history=tuple(rec["history"]), label=rec["label"]))
            elif kind == "match":
                samples.append(
                    MatchSample(history=tuple(rec["history"]), knowledge=tuple(rec["knowledge"]), label=rec["label"])
                )
            elif kind == "gen":
                samples.append(
                    GenSample(
                        history=tuple(tuple(u) for u in rec["history"]),
                        knowledge=tuple(tuple(k) for k in rec["knowledge"]),
                        reply=tuple(rec["reply"]),
                        label=rec["label"],
                    )
                )
            else:
                raise ValueError(f"unknown sample kind {kind!r}")
    return samples
