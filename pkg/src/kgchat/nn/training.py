"""Optimization loop, linear learning-rate decay, and gradient verification."""

from __future__ import annotations

import random
from dataclasses import dataclass

import torch


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    weight_decay: float = 0.01


def linear_lr(lr0: float, step: int, total_steps: int) -> float:
    """Decays linearly from lr0 at step 0 to 0 at total_steps (no warmup)."""
    if total_steps <= 0:
        return lr0
    return lr0 * max(0.0, 1.0 - step / total_steps)


def make_optimizer(model: torch.nn.Module, cfg: TrainConfig) -> torch.optim.Optimizer:
    return torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)


def train_step(model, loss_fn, batch, optimizer, step: int, total_steps: int, lr0: float) -> float:
    """One update at the scheduled learning rate; rejects non-finite losses."""
    lr = linear_lr(lr0, step, total_steps)
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.zero_grad()
    loss = loss_fn(model, batch)
    if not torch.isfinite(loss):
        raise RuntimeError(f"non-finite loss {loss.item()!r} at step {step} (lr={lr:.3g})")
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def fit(model, samples: list, collate, loss_fn, cfg: TrainConfig, log=None) -> list[float]:
    """Shuffled minibatch training over ``samples``; returns per-step losses."""
    rng = random.Random(cfg.seed)
    optimizer = make_optimizer(model, cfg)
    n_batches = max(1, (len(samples) + cfg.batch_size - 1) // cfg.batch_size)
    total_steps = cfg.epochs * n_batches
    losses: list[float] = []
    step = 0
    model.train()
    for epoch in range(cfg.epochs):
        order = list(range(len(samples)))
        rng.shuffle(order)
        for b in range(0, len(order), cfg.batch_size):
            batch = collate([samples[i] for i in order[b: b + cfg.batch_size]])
            losses.append(train_step(model, loss_fn, batch, optimizer, step, total_steps, cfg.lr))
            step += 1
        if log is not None:
            log(epoch, losses[-1])
    model.eval()
    return losses


def pad_batch(sequences: list[list[int] | tuple[int, ...]], pad_id: int, device=None):
    """Right-pad to a common length; returns (ids [B,T], mask [B,T])."""
    t = max(len(s) for s in sequences)
    ids = torch.full((len(sequences), t), pad_id, dtype=torch.long, device=device)
    mask = torch.zeros((len(sequences), t), dtype=torch.long, device=device)
    for i, s in enumerate(sequences):
        ids[i, : len(s)] = torch.as_tensor(s, dtype=torch.long)
        mask[i, : len(s)] = 1
    return ids, mask


def gradient_check(model: torch.nn.Module, loss_fn, epsilon: float = 1e-5,
                   coords_per_param: int = 50, seed: int = 0) -> float:
    """Max relative error between analytic and central finite-difference gradients.

    ``loss_fn()`` must recompute the loss from the model's current parameters.
    The model should be in double precision and eval mode; a random subset of
    at least ``coords_per_param`` coordinates is probed per parameter tensor.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon out of the supported [1e-6, 1e-3] range")
    rng = random.Random(seed)
    model.zero_grad(set_to_none=True)
    loss = loss_fn()
    loss.backward()

    max_rel = 0.0
    for _, param in model.named_parameters():
        if param.grad is None:
            continue
        flat = param.data.view(-1)
        grad = param.grad.view(-1)
        n = flat.numel()
        picks = range(n) if n <= coords_per_param else rng.sample(range(n), coords_per_param)
        for idx in picks:
            orig = flat[idx].item()
            with torch.no_grad():
                flat[idx] = orig + epsilon
                plus = float(loss_fn())
                flat[idx] = orig - epsilon
                minus = float(loss_fn())
                flat[idx] = orig
            fd = (plus - minus) / (2 * epsilon)
            an = float(grad[idx])
            # the 1e-5 floor keeps coordinates whose true gradient sits at the
            # finite-difference noise level (~|loss|*1e-11) from dominating
            rel = abs(fd - an) / max(abs(fd) + abs(an), 1e-5)
            max_rel = max(max_rel, rel)
    model.zero_grad(set_to_none=True)
    return max_rel
