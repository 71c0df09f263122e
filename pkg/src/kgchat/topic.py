"""Topic prediction: multi-class classifier over all graph topics, plus the
intersection rule that picks the best topic inside the recalled set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .kg import CandidatePool, KnowledgeGraph
from .nn import ModelConfig, TrainConfig, TransformerEncoder, fit, pad_batch
from .textprep import TopicSample


@dataclass
class TopicScores:
    """Scores over all topics; argmax is invariant to the optional softmax."""

    scores: np.ndarray
    normalized: bool = False


class TopicClassifier(nn.Module):
    def __init__(self, cfg: ModelConfig, n_topics: int):
        super().__init__()
        self.cfg = cfg
        self.n_topics = n_topics
        self.encoder = TransformerEncoder(cfg)
        self.head = nn.Linear(cfg.d_model, n_topics)
        nn.init.normal_(self.head.weight, std=0.02)
        nn.init.zeros_(self.head.bias)

    def forward(self, ids, mask):
        hidden = self.encoder(ids, mask)
        return self.head(hidden[:, 0])  # classify from the [CLS] position


def build_topic_model(cfg: ModelConfig, n_topics: int, seed: int = 0) -> TopicClassifier:
    torch.manual_seed(seed)
    model = TopicClassifier(cfg, n_topics)
    model.eval()
    return model


def predict_topic_scores(
    model: TopicClassifier,
    history_ids: list[int] | tuple[int, ...],
    apply_softmax: bool = False,
    n_topics: int | None = None,
) -> TopicScores:
    """Score all topics for one encoded history.

    Softmax is optional: it rescales but never reorders, so argmax-based
    selection can skip it.
    """
    if n_topics is not None and n_topics != model.n_topics:
        raise ValueError(f"model predicts {model.n_topics} topics but the graph has {n_topics}")
    model.eval()
    with torch.no_grad():
        ids, mask = pad_batch([list(history_ids)], pad_id=0)
        logits = model(ids, mask)[0]
        if apply_softmax:
            return TopicScores(torch.softmax(logits, dim=-1).numpy(), normalized=True)
        return TopicScores(logits.numpy(), normalized=False)


def select_best_topic(scores: TopicScores, candidates, graph: KnowledgeGraph) -> str | None:
    """Highest-scoring topic that is also in the candidate set; None if empty.

    Ties break toward the lower topic id.
    """
    best_name: str | None = None
    best_key: tuple[float, int] | None = None
    for name in candidates:
        if not graph.is_topic(name):
            continue
        tid = graph.topic_id(name)
        key = (-float(scores.scores[tid]), tid)
        if best_key is None or key < best_key:
            best_key = key
            best_name = name
    return best_name


def select_topic_knowledge(graph: KnowledgeGraph, pool: CandidatePool, best_topic: str | None) -> CandidatePool:
    """Filter the recalled candidates down to the best topic's triples."""
    if best_topic is None or not graph.is_topic(best_topic):
        return CandidatePool(triples=[], skipped_topics=[best_topic] if best_topic else [])
    return CandidatePool(triples=[t for t in pool.triples if t.head == best_topic])


def _collate(batch: list[TopicSample]):
    ids, mask = pad_batch([s.history for s in batch], pad_id=0)
    labels = torch.as_tensor([s.label for s in batch], dtype=torch.long)
    return ids, mask, labels


def _loss(model, batch):
    ids, mask, labels = batch
    return F.cross_entropy(model(ids, mask), labels)


def train_topic_model(
    samples: list[TopicSample],
    n_topics: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    log=None,
) -> TopicClassifier:
    for s in samples:
        if s.label >= n_topics:
            raise ValueError(f"label {s.label} out of range for {n_topics} topics")
    model = build_topic_model(model_cfg, n_topics, seed=train_cfg.seed)
    fit(model, samples, _collate, _loss, train_cfg, log=log)
    return model


def topic_accuracy(model: TopicClassifier, samples: list[TopicSample], batch_size: int = 64) -> float:
    """Percent of samples whose argmax matches the gold label."""
    model.eval()
    correct = 0
    with torch.no_grad():
        for b in range(0, len(samples), batch_size):
            ids, mask, labels = _collate(samples[b: b + batch_size])
            correct += int((model(ids, mask).argmax(dim=-1) == labels).sum())
    return correct / len(samples) * 100.0
