"""Loss functions for the matcher and generator training objectives."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def binary_match_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Summed binary cross-entropy over match scores.

    Equals -sum_pos log(sigmoid(z)) - sum_neg log(1 - sigmoid(z)), the
    two-class log loss over the positive and negative candidate sets.
    """
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype), reduction="sum")


def pairwise_ranking_loss(logits: torch.Tensor, first_is_positive: torch.Tensor) -> torch.Tensor:
    """Summed log loss over (candidate a, candidate b) pair scores.

    The score is trained toward 1 when the first candidate of the pair is the
    relevant one and toward 0 when the order is flipped.
    """
    return F.binary_cross_entropy_with_logits(logits, first_is_positive.to(logits.dtype), reduction="sum")


def lm_loss(logits: torch.Tensor, targets: torch.Tensor, pad_id: int) -> torch.Tensor:
    """Token-level cross-entropy (mean over non-pad targets)."""
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=pad_id)


def nsp_loss(nsp_logit: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy of the reply-suitability logit."""
    return F.binary_cross_entropy_with_logits(nsp_logit, label.to(nsp_logit.dtype), reduction="mean")


def multitask_loss(lm: torch.Tensor, nsp: torch.Tensor, suitable: bool) -> torch.Tensor:
    """Mix the generation and suitability losses per sample.

    A suitable reply weighs both tasks equally; an unsuitable one contributes
    only the suitability loss (its language-model term is zero-weighted, and
    returned untouched so the identity is exact).
    """
    if suitable:
        return 0.5 * lm + 0.5 * nsp
    return nsp
