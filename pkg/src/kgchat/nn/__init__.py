from .modules import (
    ModelConfig,
    TransformerDecoder,
    TransformerEncoder,
    causal_attn_mask,
    padding_attn_mask,
)
from .losses import binary_match_loss, lm_loss, multitask_loss, nsp_loss, pairwise_ranking_loss
from .training import TrainConfig, fit, gradient_check, linear_lr, make_optimizer, pad_batch, train_step

__all__ = [
    "ModelConfig", "TransformerEncoder", "TransformerDecoder",
    "causal_attn_mask", "padding_attn_mask",
    "binary_match_loss", "pairwise_ranking_loss", "lm_loss", "nsp_loss", "multitask_loss",
    "TrainConfig", "fit", "gradient_check", "linear_lr", "make_optimizer", "pad_batch", "train_step",
]
