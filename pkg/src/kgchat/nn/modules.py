"""Toy-scale trainable transformer components shared by all three models.

Post-LN blocks, learned positional embeddings, additive attention masking.
A zero-layer encoder reduces exactly to embedding + positional encoding,
and masked attention weights underflow to exact zeros, so padding cannot
leak into real positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

NEG_INF = -1e9  # large finite mask value; exp() underflows to exactly 0.0


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    max_positions: int = 512
    dropout: float = 0.0
    d_ff: int | None = None

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")
        if self.d_ff is None:
            self.d_ff = 4 * self.d_model


def init_weights(module: nn.Module) -> None:
    if isinstance(module, nn.Linear):
        nn.init.normal_(module.weight, std=0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.Embedding):
        nn.init.normal_(module.weight, std=0.02)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


def padding_attn_mask(mask: torch.Tensor, dtype: torch.dtype) -> torch.Tensor:
    """[B, T] 1/0 keep mask -> [B, 1, 1, T] additive mask."""
    return (1.0 - mask.to(dtype)).unsqueeze(1).unsqueeze(2) * NEG_INF


def causal_attn_mask(t: int, device, dtype) -> torch.Tensor:
    """[1, 1, T, T] additive mask; position i may attend to j <= i."""
    allowed = torch.tril(torch.ones(t, t, device=device, dtype=torch.bool))
    return torch.where(allowed, 0.0, NEG_INF).to(dtype).view(1, 1, t, t)


class MultiHeadAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.d_head = cfg.d_model // cfg.n_heads
        self.wq = nn.Linear(cfg.d_model, cfg.d_model)
        self.wk = nn.Linear(cfg.d_model, cfg.d_model)
        self.wv = nn.Linear(cfg.d_model, cfg.d_model)
        self.wo = nn.Linear(cfg.d_model, cfg.d_model)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, q_in, kv_in, attn_mask=None):
        b, tq, _ = q_in.shape
        tk = kv_in.shape[1]
        q = self.wq(q_in).view(b, tq, self.n_heads, self.d_head).transpose(1, 2)
        k = self.wk(kv_in).view(b, tk, self.n_heads, self.d_head).transpose(1, 2)
        v = self.wv(kv_in).view(b, tk, self.n_heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if attn_mask is not None:
            scores = scores + attn_mask
        weights = torch.softmax(scores, dim=-1)
        weights = self.dropout(weights)
        out = (weights @ v).transpose(1, 2).reshape(b, tq, -1)
        return self.wo(out)


class FeedForward(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_ff),
            nn.GELU(),
            nn.Linear(cfg.d_ff, cfg.d_model),
            nn.Dropout(cfg.dropout),
        )

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn = MultiHeadAttention(cfg)
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg)
        self.ln2 = nn.LayerNorm(cfg.d_model)

    def forward(self, x, attn_mask):
        x = self.ln1(x + self.attn(x, x, attn_mask))
        return self.ln2(x + self.ffn(x))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig, cross_attention: bool):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg)
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.cross_attn = MultiHeadAttention(cfg) if cross_attention else None
        self.ln_cross = nn.LayerNorm(cfg.d_model) if cross_attention else None
        self.ffn = FeedForward(cfg)
        self.ln2 = nn.LayerNorm(cfg.d_model)

    def forward(self, x, self_mask, enc_states=None, enc_mask=None):
        x = self.ln1(x + self.self_attn(x, x, self_mask))
        if self.cross_attn is not None and enc_states is not None:
            x = self.ln_cross(x + self.cross_attn(x, enc_states, enc_mask))
        return self.ln2(x + self.ffn(x))


class Embeddings(nn.Module):
    """Token + learned positional embedding; the zero-layer identity stack."""

    def __init__(self, cfg: ModelConfig, token_embedding: nn.Embedding | None = None):
        super().__init__()
        self.token = token_embedding if token_embedding is not None else nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.position = nn.Embedding(cfg.max_positions, cfg.d_model)
        self.dropout = nn.Dropout(cfg.dropout)
        self.vocab_size = cfg.vocab_size

    def forward(self, ids):
        if ids.numel() and int(ids.max()) >= self.vocab_size:
            raise ValueError(f"token id {int(ids.max())} out of range for vocab of {self.vocab_size}")
        positions = torch.arange(ids.shape[1], device=ids.device)
        return self.dropout(self.token(ids) + self.position(positions))


class TransformerEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig, token_embedding: nn.Embedding | None = None):
        super().__init__()
        self.cfg = cfg
        self.embeddings = Embeddings(cfg, token_embedding)
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.n_layers))
        self.apply(init_weights)

    def forward(self, ids, mask=None):
        """ids [B, T] -> hidden states [B, T, d]; mask 1 = real token, 0 = pad."""
        x = self.embeddings(ids)
        attn_mask = padding_attn_mask(mask, x.dtype) if mask is not None else None
        for layer in self.layers:
            x = layer(x, attn_mask)
        return x


class TransformerDecoder(nn.Module):
    """Causal decoder with optional cross-attention and a tied output projection.

    The output projection shares the token embedding table, so decoder logits
    are ``hidden @ embedding.T``. Pass an existing embedding to share tables
    with an encoder.
    """

    def __init__(self, cfg: ModelConfig, cross_attention: bool = True,
                 token_embedding: nn.Embedding | None = None):
        super().__init__()
        self.cfg = cfg
        self.cross_attention = cross_attention
        self.embeddings = Embeddings(cfg, token_embedding)
        self.layers = nn.ModuleList(DecoderLayer(cfg, cross_attention) for _ in range(cfg.n_layers))
        self.apply(init_weights)

    def hidden(self, ids, enc_states=None, enc_mask=None):
        x = self.embeddings(ids)
        self_mask = causal_attn_mask(ids.shape[1], ids.device, x.dtype)
        cross = padding_attn_mask(enc_mask, x.dtype) if enc_mask is not None else None
        for layer in self.layers:
            x = layer(x, self_mask, enc_states, cross)
        return x

    def logits(self, hidden):
        return hidden @ self.embeddings.token.weight.t()

    def forward(self, ids, enc_states=None, enc_mask=None):
        hidden = self.hidden(ids, enc_states, enc_mask)
        return self.logits(hidden), hidden
