"""Knowledge matching: score candidate triples against the dialogue history.

Primary path is a twin-encoder model (one parameter set encoding history and
knowledge separately, combined as [a; b; |a-b|]). Variants: two distinct
encoders ("twin-diff" ablation) and a single-encoder pairwise ranker that
scores (candidate a, candidate b) order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import torch
from torch import nn

from .kg import KnowledgeTriple
from .nn import ModelConfig, TrainConfig, TransformerEncoder, binary_match_loss, fit, pad_batch
from .nn import pairwise_ranking_loss
from .textprep import MatchDataset, MatchSample, Tokenizer, encode_knowledge

VARIANTS = ("twin", "twin-diff", "pairwise")


@dataclass
class MatchScore:
    value: float   # sigmoid score in (0, 1)
    logit: float   # raw head output; same ranking as value


@dataclass
class RankedKnowledge:
    items: list[tuple[KnowledgeTriple, MatchScore]]
    top_n: int

    def triples(self) -> list[KnowledgeTriple]:
        return [t for t, _ in self.items]

    def __len__(self):
        return len(self.items)


class TwinMatcher(nn.Module):
    def __init__(self, cfg: ModelConfig, shared_encoders: bool = True):
        super().__init__()
        self.cfg = cfg
        self.shared_encoders = shared_encoders
        self.history_encoder = TransformerEncoder(cfg)
        self.knowledge_encoder = self.history_encoder if shared_encoders else TransformerEncoder(cfg)
        self.head = nn.Linear(3 * cfg.d_model, 1)
        nn.init.normal_(self.head.weight, std=0.02)
        nn.init.zeros_(self.head.bias)

    def forward(self, h_ids, h_mask, k_ids, k_mask):
        a = self.history_encoder(h_ids, h_mask)[:, 0]
        b = self.knowledge_encoder(k_ids, k_mask)[:, 0]
        combined = torch.cat([a, b, (a - b).abs()], dim=-1)
        return self.head(combined).squeeze(-1)


class PairwiseMatcher(nn.Module):
    """Single encoder over [CLS] history [SEP] k_a [SEP] k_b [SEP]."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = TransformerEncoder(cfg)
        self.head = nn.Linear(cfg.d_model, 1)
        nn.init.normal_(self.head.weight, std=0.02)
        nn.init.zeros_(self.head.bias)

    def forward(self, ids, mask):
        return self.head(self.encoder(ids, mask)[:, 0]).squeeze(-1)


def build_matcher(cfg: ModelConfig, variant: str = "twin", seed: int = 0):
    if variant not in VARIANTS:
        raise ValueError(f"unknown matcher variant {variant!r}; pick one of {VARIANTS}")
    torch.manual_seed(seed)
    model = PairwiseMatcher(cfg) if variant == "pairwise" else TwinMatcher(cfg, shared_encoders=(variant == "twin"))
    model.eval()
    return model


def score_knowledge(model: TwinMatcher, history_ids, knowledge_ids) -> MatchScore:
    model.eval()
    with torch.no_grad():
        h_ids, h_mask = pad_batch([list(history_ids)], pad_id=0)
        k_ids, k_mask = pad_batch([list(knowledge_ids)], pad_id=0)
        logit = float(model(h_ids, h_mask, k_ids, k_mask)[0])
    return MatchScore(value=float(torch.sigmoid(torch.tensor(logit))), logit=logit)


def rank_knowledge(
    model: TwinMatcher,
    tokenizer: Tokenizer,
    history_ids,
    candidates: list[KnowledgeTriple],
    top_n: int,
) -> RankedKnowledge:
    """Sort candidates by match score, highest first; ties keep candidate order."""
    if not candidates:
        return RankedKnowledge(items=[], top_n=top_n)
    model.eval()
    with torch.no_grad():
        h_ids, h_mask = pad_batch([list(history_ids)] * len(candidates), pad_id=0)
        k_ids, k_mask = pad_batch([encode_knowledge(tokenizer, t) for t in candidates], pad_id=0)
        logits = model(h_ids, h_mask, k_ids, k_mask)
        values = torch.sigmoid(logits)
    order = sorted(range(len(candidates)), key=lambda i: -float(logits[i]))
    items = [
        (candidates[i], MatchScore(value=float(values[i]), logit=float(logits[i])))
        for i in order[:top_n]
    ]
    return RankedKnowledge(items=items, top_n=top_n)


# --------------------------------------------------------------------------
# Pairwise variant
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PairSample:
    ids: tuple[int, ...]
    label: int  # 1 when the first candidate in the pair is the relevant one


def _history_tail(history_ids, sep_id: int, cls_id: int, max_utts: int = 3) -> list[int]:
    """Last ``max_utts`` [SEP]-delimited segments of an encoded history."""
    body = [i for i in history_ids if i != cls_id]
    segments: list[list[int]] = [[]]
    for tok in body:
        segments[-1].append(tok)
        if tok == sep_id:
            segments.append([])
    segments = [s for s in segments if s]
    out: list[int] = []
    for seg in segments[-max_utts:]:
        out.extend(seg)
    return out


def build_pairwise_input(
    tokenizer: Tokenizer,
    history_ids,
    k_first,
    k_second,
    max_len: int = 500,
) -> list[int]:
    """[CLS] last-3-utterance history [SEP]... k_a [SEP] k_b [SEP], capped at max_len."""
    strip = {tokenizer.cls_id, tokenizer.sep_id}
    ka = [i for i in k_first if i not in strip]
    kb = [i for i in k_second if i not in strip]
    hist = _history_tail(history_ids, tokenizer.sep_id, tokenizer.cls_id)
    ids = [tokenizer.cls_id] + hist + ka + [tokenizer.sep_id] + kb + [tokenizer.sep_id]
    return ids[:max_len]


def make_pairwise_samples(dataset: MatchDataset, tokenizer: Tokenizer, seed: int = 0) -> list[PairSample]:
    """Derive (positive, negative) pairs from a 1:4 match dataset.

    Each positive is paired with each of its sampled negatives; pair order is
    randomized so position carries no label signal.
    """
    rng = random.Random(seed)
    pairs: list[PairSample] = []
    current_pos: MatchSample | None = None
    for s in dataset.samples:
        if s.label == 1:
            current_pos = s
            continue
        if current_pos is None or s.history != current_pos.history:
            continue
        if rng.random() < 0.5:
            ids = build_pairwise_input(tokenizer, s.history, current_pos.knowledge, s.knowledge)
            pairs.append(PairSample(ids=tuple(ids), label=1))
        else:
            ids = build_pairwise_input(tokenizer, s.history, s.knowledge, current_pos.knowledge)
            pairs.append(PairSample(ids=tuple(ids), label=0))
    return pairs


def score_pairwise(model: PairwiseMatcher, tokenizer: Tokenizer, history_ids, k_first, k_second) -> MatchScore:
    """Score for 'the first candidate is the relevant one of this pair'."""
    model.eval()
    with torch.no_grad():
        ids, mask = pad_batch([build_pairwise_input(tokenizer, history_ids, k_first, k_second)], pad_id=0)
        logit = float(model(ids, mask)[0])
    return MatchScore(value=float(torch.sigmoid(torch.tensor(logit))), logit=logit)


# --------------------------------------------------------------------------
# Training and evaluation
# --------------------------------------------------------------------------

def _twin_collate(batch: list[MatchSample]):
    h_ids, h_mask = pad_batch([s.history for s in batch], pad_id=0)
    k_ids, k_mask = pad_batch([s.knowledge for s in batch], pad_id=0)
    labels = torch.as_tensor([s.label for s in batch], dtype=torch.float)
    return h_ids, h_mask, k_ids, k_mask, labels


def _twin_loss(model, batch):
    h_ids, h_mask, k_ids, k_mask, labels = batch
    return binary_match_loss(model(h_ids, h_mask, k_ids, k_mask), labels)


def _pair_collate(batch: list[PairSample]):
    ids, mask = pad_batch([s.ids for s in batch], pad_id=0)
    labels = torch.as_tensor([s.label for s in batch], dtype=torch.float)
    return ids, mask, labels


def _pair_loss(model, batch):
    ids, mask, labels = batch
    return pairwise_ranking_loss(model(ids, mask), labels)


def train_matcher(
    dataset: MatchDataset,
    variant: str,
    tokenizer: Tokenizer,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    log=None,
):
    model = build_matcher(model_cfg, variant, seed=train_cfg.seed)
    if variant == "pairwise":
        pairs = make_pairwise_samples(dataset, tokenizer, seed=train_cfg.seed)
        if not pairs:
            raise ValueError("match dataset yields no positive/negative pairs")
        fit(model, pairs, _pair_collate, _pair_loss, train_cfg, log=log)
    else:
        fit(model, dataset.samples, _twin_collate, _twin_loss, train_cfg, log=log)
    return model


def matcher_accuracy(model: TwinMatcher, samples: list[MatchSample], batch_size: int = 64) -> float:
    """Binary classification accuracy at threshold 0.5, in percent."""
    model.eval()
    correct = 0
    with torch.no_grad():
        for b in range(0, len(samples), batch_size):
            h_ids, h_mask, k_ids, k_mask, labels = _twin_collate(samples[b: b + batch_size])
            pred = (model(h_ids, h_mask, k_ids, k_mask) > 0).float()
            correct += int((pred == labels).sum())
    return correct / len(samples) * 100.0


def pairwise_accuracy(model: PairwiseMatcher, pairs: list[PairSample], batch_size: int = 64) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for b in range(0, len(pairs), batch_size):
            ids, mask, labels = _pair_collate(pairs[b: b + batch_size])
            pred = (model(ids, mask) > 0).float()
            correct += int((pred == labels).sum())
    return correct / len(pairs) * 100.0
