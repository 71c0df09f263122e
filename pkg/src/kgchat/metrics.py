"""Evaluation metrics and report harness.

AVG.B is the arithmetic mean of sentence-level BLEU-1..4 on a 0-100 scale;
Dis-2 the corpus-pooled distinct-bigram ratio. Selection accuracy@n measures
whether the gold triple survives the recall-and-rank cascade.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .kg import KnowledgeTriple


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def bleu_avg(hypothesis, reference) -> float:
    """Mean of BLEU-1..4 for one sentence pair, in [0, 100].

    Precisions are clipped; zero precisions above the unigram level get
    add-one smoothing ((m+1)/(t+1)); a zero unigram precision makes the whole
    score 0. The brevity penalty is exp(1 - |ref|/|hyp|) for short hypotheses.
    """
    hyp = list(hypothesis)
    ref = list(reference)
    if not ref:
        raise ValueError("reference must be non-empty")
    if not hyp:
        return 0.0
    log_p: list[float] = []
    for k in range(1, 5):
        total = max(len(hyp) - k + 1, 0)
        hyp_counts = _ngrams(hyp, k)
        ref_counts = _ngrams(ref, k)
        matched = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        if matched > 0:
            log_p.append(math.log(matched / total))
        elif k == 1:
            return 0.0
        else:
            log_p.append(math.log((matched + 1) / (total + 1)))
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    bleu_n = [bp * math.exp(sum(log_p[:n]) / n) for n in range(1, 5)]
    return 100.0 * sum(bleu_n) / 4.0


def corpus_bleu_avg(pairs) -> float:
    """Mean sentence AVG.B over (hypothesis, reference) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pairs to score")
    return sum(bleu_avg(h, r) for h, r in pairs) / len(pairs)


def distinct2(hypotheses, per_response: bool = False) -> float:
    """Distinct-bigram percentage over generated responses.

    Corpus-pooled by default (distinct bigrams across all hypotheses over
    total bigrams); ``per_response`` averages the per-hypothesis ratio
    instead.
    """
    hyps = [list(h) for h in hypotheses]
    if per_response:
        ratios = [len(set(_ngrams(h, 2))) / (len(h) - 1) for h in hyps if len(h) >= 2]
        if not ratios:
            raise ValueError("no hypothesis long enough to form a bigram")
        return 100.0 * sum(ratios) / len(ratios)
    seen: set[tuple] = set()
    total = 0
    for h in hyps:
        for i in range(len(h) - 1):
            seen.add(tuple(h[i: i + 2]))
            total += 1
    if total == 0:
        raise ValueError("no hypothesis long enough to form a bigram")
    return 100.0 * len(seen) / total


def selection_accuracy_at_n(
    ranked: list[list[KnowledgeTriple]],
    golds: list[list[KnowledgeTriple]],
    ns: tuple[int, ...] = (1, 3, 5),
) -> dict[int, float]:
    """Percent of samples whose top-n ranking contains a gold triple."""
    if len(ranked) != len(golds):
        raise ValueError("ranked and gold lists differ in length")
    if not ranked:
        raise ValueError("no samples")
    out = {}
    for n in ns:
        hits = sum(
            1 for cand, gold in zip(ranked, golds) if any(t in cand[:n] for t in gold)
        )
        out[n] = hits / len(ranked) * 100.0
    return out


@dataclass
class EvalReport:
    condition: str
    avg_b: float
    dis_2: float
    n_samples: int
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "AVG.B": round(self.avg_b, 2),
            "Dis-2": round(self.dis_2, 2),
            "n_samples": self.n_samples,
            **self.extras,
        }


def generation_report(condition: str, pairs) -> EvalReport:
    """Score (hypothesis, reference) token pairs into an AVG.B / Dis-2 report."""
    pairs = list(pairs)
    return EvalReport(
        condition=condition,
        avg_b=corpus_bleu_avg(pairs),
        dis_2=distinct2([h for h, _ in pairs]),
        n_samples=len(pairs),
    )


def evaluate_pipeline(runtime, dialogues, knowledge_source: str = "gold", reply_fn=None,
                      max_samples: int | None = None) -> EvalReport:
    """Generate a reply per annotated test turn and report AVG.B + Dis-2.

    ``knowledge_source`` is one of ``gold``, ``recalled@1``, ``recalled@3``.
    ``reply_fn(history_texts, triples, ref_tokens) -> hyp_tokens`` overrides
    the generator (harness self-test hook).
    """
    if knowledge_source == "gold":
        top_k = None
    elif knowledge_source.startswith("recalled@") and knowledge_source[9:].isdigit():
        top_k = int(knowledge_source[9:])
    else:
        raise ValueError(f"unknown knowledge source {knowledge_source!r} (use gold or recalled@<k>)")

    pairs = []
    for dlg in dialogues:
        for i in range(1, len(dlg.messages)):
            msg = dlg.messages[i]
            gold = [t for t in msg.attrs if runtime.graph.is_topic(t.head)]
            if not gold:
                continue
            history = [m.text for m in dlg.messages[:i]]
            if top_k is None:
                triples = gold
            else:
                triples = runtime.recalled_knowledge(history, top_k)
            ref = runtime.tokenizer.encode(msg.text)
            if reply_fn is not None:
                hyp = reply_fn(history, triples, ref)
            else:
                hyp = runtime.generate_from(history, triples).tokens
            pairs.append((hyp, ref))
            if max_samples is not None and len(pairs) >= max_samples:
                break
        if max_samples is not None and len(pairs) >= max_samples:
            break
    report = generation_report(knowledge_source, pairs)
    return report


def render_table(headers: list[str], rows: list[list]) -> str:
    """Aligned plain-text table for console reports."""
    cells = [[str(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(c.ljust(w) for c, w in zip(row, widths))
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in cells)
    return "\n".join(lines)
