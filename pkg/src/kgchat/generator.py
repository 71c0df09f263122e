"""Knowledge-conditioned response generation.

Two architectures over the shared transformer core:

* enc-dec   -- encoder over [CLS] knowledge... [SEP] + speaker-tagged history,
               causal decoder with cross-attention (optionally sharing the
               embedding table with the encoder)
* dec-only  -- one causal stack over context + [BOS] + reply

Training is multi-task: token-level language modeling plus a reply-suitability
head (NSP-style) read off the last reply token's hidden state. A suitable
sample mixes both losses equally; an unsuitable one trains the suitability
head alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
import torch.nn.functional as F

from .nn import ModelConfig, TrainConfig, TransformerDecoder, TransformerEncoder, fit, pad_batch
from .textprep import GenSample, Tokenizer

ARCHITECTURES = ("encdec", "deconly")


@dataclass
class GeneratorInput:
    ids: list[int]
    n_knowledge: int
    text: str = ""


@dataclass
class GenerationOutput:
    tokens: list[int]               # generated reply, end token excluded
    token_logprobs: list[float]     # one per decode step, end token included
    nsp_score: float | None = None
    finished: bool = True

    @property
    def log_prob(self) -> float:
        return sum(self.token_logprobs)

    @property
    def normalized_log_prob(self) -> float:
        return self.log_prob / max(len(self.token_logprobs), 1)


def build_generator_input(
    tokenizer: Tokenizer,
    knowledge: list[list[int]] | list[tuple[int, ...]],
    history: list[list[int]] | list[tuple[int, ...]],
    max_len: int = 400,
) -> GeneratorInput:
    """[CLS] k_1 [SEP] ... k_m [SEP] + speaker-tagged history, within max_len.

    Knowledge pieces are kept whole: over budget, trailing pieces are dropped
    before any history is cut, and history is then front-truncated so the
    newest utterance survives. A single knowledge piece that cannot fit is an
    error (shrink the triple or raise max_len).
    """
    if not history:
        raise ValueError("history must contain at least one utterance")
    pieces = [list(k) for k in knowledge]
    while True:
        seg = [tokenizer.cls_id]
        for k in pieces:
            seg.extend(k)
            seg.append(tokenizer.sep_id)
        if len(seg) <= max_len or len(pieces) <= 1:
            break
        pieces = pieces[:-1]
    if len(seg) > max_len:
        raise ValueError(
            f"a single knowledge piece of {len(seg)} tokens exceeds max_len={max_len}; "
            "shorten the triple text or raise the budget"
        )
    # last history utterance is the user's turn -> [speaker1], alternating backwards
    hist: list[int] = []
    n = len(history)
    for i, utt in enumerate(history):
        tag = tokenizer.speaker1_id if (n - 1 - i) % 2 == 0 else tokenizer.speaker2_id
        hist.append(tag)
        hist.extend(utt)
    budget = max_len - len(seg)
    if len(hist) > budget:
        hist = hist[-budget:]
    return GeneratorInput(ids=seg + hist, n_knowledge=len(pieces))


class Seq2SeqGenerator(nn.Module):
    def __init__(self, cfg: ModelConfig, share_embeddings: bool = False):
        super().__init__()
        self.cfg = cfg
        self.arch = "encdec"
        self.share_embeddings = share_embeddings
        self.encoder = TransformerEncoder(cfg)
        shared = self.encoder.embeddings.token if share_embeddings else None
        self.decoder = TransformerDecoder(cfg, cross_attention=True, token_embedding=shared)
        if not share_embeddings:
            # decoder vocabulary table starts from the encoder's initial weights
            with torch.no_grad():
                self.decoder.embeddings.token.weight.copy_(self.encoder.embeddings.token.weight)
        self.nsp_head = nn.Linear(cfg.d_model, 1)
        nn.init.normal_(self.nsp_head.weight, std=0.02)
        nn.init.zeros_(self.nsp_head.bias)

    def reply_logits(self, input_ids, input_mask, dec_ids):
        enc_states = self.encoder(input_ids, input_mask)
        logits, hidden = self.decoder(dec_ids, enc_states, input_mask)
        return logits, hidden


class DecoderOnlyGenerator(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.arch = "deconly"
        self.share_embeddings = True  # single stack, single table
        self.decoder = TransformerDecoder(cfg, cross_attention=False)
        self.nsp_head = nn.Linear(cfg.d_model, 1)
        nn.init.normal_(self.nsp_head.weight, std=0.02)
        nn.init.zeros_(self.nsp_head.bias)

    def full_logits(self, ids):
        logits, hidden = self.decoder(ids)
        return logits, hidden


def build_generator(cfg: ModelConfig, arch: str = "encdec", share_embeddings: bool = False, seed: int = 0):
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown generator architecture {arch!r}; pick one of {ARCHITECTURES}")
    torch.manual_seed(seed)
    model = Seq2SeqGenerator(cfg, share_embeddings) if arch == "encdec" else DecoderOnlyGenerator(cfg)
    model.eval()
    return model


# --------------------------------------------------------------------------
# Scoring and decoding
# --------------------------------------------------------------------------

def _step_logits(model, gen_input: GeneratorInput, dec_tokens: list[int], tokenizer: Tokenizer):
    """Logits over the next token after each decoder position, teacher-forced."""
    if model.arch == "encdec":
        enc_ids, enc_mask = pad_batch([gen_input.ids], pad_id=tokenizer.pad_id)
        dec_ids = torch.as_tensor([[tokenizer.bos_id] + dec_tokens], dtype=torch.long)
        logits, hidden = model.reply_logits(enc_ids, enc_mask, dec_ids)
        return logits[0], hidden[0]
    full = torch.as_tensor([gen_input.ids + [tokenizer.bos_id] + dec_tokens], dtype=torch.long)
    logits, hidden = model.full_logits(full)
    start = len(gen_input.ids)
    return logits[0, start:], hidden[0, start:]


def sequence_log_prob(model, gen_input: GeneratorInput, reply: list[int], tokenizer: Tokenizer) -> float:
    """log p(reply | input) as the sum of per-token conditional log-probs."""
    if not reply:
        return 0.0
    model.eval()
    with torch.no_grad():
        logits, _ = _step_logits(model, gen_input, list(reply), tokenizer)
        logp = F.log_softmax(logits, dim=-1)
        return float(sum(logp[j, reply[j]] for j in range(len(reply))))


def nsp_score(model, gen_input: GeneratorInput, reply: list[int], tokenizer: Tokenizer) -> float:
    """Suitability score of a reply: sigmoid head over the last reply token's state."""
    model.eval()
    with torch.no_grad():
        _, hidden = _step_logits(model, gen_input, list(reply), tokenizer)
        return float(torch.sigmoid(model.nsp_head(hidden[len(reply)])))


def generate(
    model,
    gen_input: GeneratorInput,
    tokenizer: Tokenizer,
    decode: str = "greedy",
    beam_width: int = 4,
    max_new_tokens: int = 40,
) -> GenerationOutput:
    """Decode a reply; stops at the end token or the step limit.

    Beam search returns the finished hypothesis with the best
    length-normalized log-probability; width 1 coincides with greedy.
    """
    if decode == "greedy":
        beam_width = 1
    elif decode != "beam":
        raise ValueError(f"unknown decode strategy {decode!r}")

    model.eval()
    eos = tokenizer.eos_id
    with torch.no_grad():
        # live hypotheses: (tokens, per-step logprobs)
        live: list[tuple[list[int], list[float]]] = [([], [])]
        done: list[tuple[list[int], list[float]]] = []
        for _ in range(max_new_tokens):
            candidates: list[tuple[list[int], list[float]]] = []
            for tokens, lps in live:
                logits, _ = _step_logits(model, gen_input, tokens, tokenizer)
                logp = F.log_softmax(logits[len(tokens)], dim=-1)
                top = torch.topk(logp, min(beam_width, logp.shape[-1]))
                for val, idx in zip(top.values.tolist(), top.indices.tolist()):
                    candidates.append((tokens + [idx], lps + [val]))
            candidates.sort(key=lambda c: -sum(c[1]))
            live = []
            for tokens, lps in candidates:
                if tokens[-1] == eos:
                    done.append((tokens[:-1], lps))
                elif len(live) < beam_width:
                    live.append((tokens, lps))
                if len(live) >= beam_width and len(done) >= beam_width:
                    break
            if not live:
                break
        finished = [(t, lps, True) for t, lps in done] + [(t, lps, False) for t, lps in live]
        best = max(finished, key=lambda c: sum(c[1]) / max(len(c[1]), 1))
        tokens, lps, is_finished = best
        out = GenerationOutput(tokens=tokens, token_logprobs=lps, finished=is_finished)
        out.nsp_score = nsp_score(model, gen_input, tokens, tokenizer)
        return out


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

@dataclass
class GenTrainBatch:
    enc_ids: torch.Tensor | None
    enc_mask: torch.Tensor | None
    dec_ids: torch.Tensor
    targets: torch.Tensor       # -100 outside the reply region
    last_pos: torch.Tensor      # index of the last reply token per sample
    labels: torch.Tensor        # suitability p_i
    reply_starts: torch.Tensor  # first decoder position that predicts a reply token


def _make_collate(tokenizer: Tokenizer, arch: str, m: int, max_len: int):
    pad = tokenizer.pad_id

    def collate(batch: list[GenSample]) -> GenTrainBatch:
        inputs = [
            build_generator_input(tokenizer, list(s.knowledge[:m]), list(s.history), max_len)
            for s in batch
        ]
        if arch == "encdec":
            enc_ids, enc_mask = pad_batch([gi.ids for gi in inputs], pad_id=pad)
            dec_seqs = [[tokenizer.bos_id] + list(s.reply) for s in batch]
            starts = [0] * len(batch)
        else:
            enc_ids = enc_mask = None
            dec_seqs = [gi.ids + [tokenizer.bos_id] + list(s.reply) for gi, s in zip(inputs, batch)]
            starts = [len(gi.ids) for gi in inputs]
        dec_ids, _ = pad_batch(dec_seqs, pad_id=pad)
        targets = torch.full_like(dec_ids, -100)
        last_pos = torch.zeros(len(batch), dtype=torch.long)
        for i, s in enumerate(batch):
            reply = list(s.reply) + [tokenizer.eos_id]
            lo = starts[i]
            targets[i, lo: lo + len(reply)] = torch.as_tensor(reply)
            last_pos[i] = lo + len(s.reply)  # position holding the final reply token
        labels = torch.as_tensor([s.label for s in batch], dtype=torch.float)
        return GenTrainBatch(enc_ids, enc_mask, dec_ids, targets, last_pos,
                             labels, torch.as_tensor(starts))

    return collate


def _gen_loss(model, batch: GenTrainBatch, use_nsp: bool):
    if model.arch == "encdec":
        logits, hidden = model.reply_logits(batch.enc_ids, batch.enc_mask, batch.dec_ids)
    else:
        logits, hidden = model.full_logits(batch.dec_ids)
    b, t, v = logits.shape
    ce = F.cross_entropy(logits.reshape(-1, v), batch.targets.reshape(-1),
                         ignore_index=-100, reduction="none").view(b, t)
    counts = (batch.targets != -100).sum(dim=1).clamp(min=1)
    lm_per_sample = ce.sum(dim=1) / counts
    if not use_nsp:
        return lm_per_sample.mean()
    nsp_logits = model.nsp_head(hidden[torch.arange(b), batch.last_pos]).squeeze(-1)
    labels = batch.labels.to(nsp_logits.dtype)  # BCE silently adopts the target dtype
    nsp_per_sample = F.binary_cross_entropy_with_logits(nsp_logits, labels, reduction="none")
    alpha = 0.5 * labels  # 0.5 for suitable replies, 0 otherwise
    total = alpha * lm_per_sample + (1.0 - alpha) * nsp_per_sample
    return total.mean()


def train_generator(
    dataset_samples: list[GenSample],
    tokenizer: Tokenizer,
    arch: str = "encdec",
    share_embeddings: bool = False,
    m: int = 1,
    use_nsp: bool = True,
    model_cfg: ModelConfig | None = None,
    train_cfg: TrainConfig | None = None,
    max_len: int = 400,
    allow_any_m: bool = False,
    log=None,
):
    """Train a generator on generation samples; returns the model.

    Without the suitability task only suitable (p=1) samples are used, and the
    objective is plain token-level cross-entropy.
    """
    if m not in (1, 3) and not allow_any_m:
        raise ValueError(f"m={m} knowledge pieces unsupported; use 1 or 3 (or allow_any_m)")
    model_cfg = model_cfg or ModelConfig(vocab_size=len(tokenizer))
    train_cfg = train_cfg or TrainConfig()
    model = build_generator(model_cfg, arch, share_embeddings, seed=train_cfg.seed)
    samples = dataset_samples if use_nsp else [s for s in dataset_samples if s.label == 1]
    if not samples:
        raise ValueError("no training samples (did negative filtering drop everything?)")
    collate = _make_collate(tokenizer, arch, m, max_len)
    fit(model, samples, collate, lambda mod, b: _gen_loss(mod, b, use_nsp), train_cfg, log=log)
    return model
