"""Versioned checkpoint format: JSON manifest + raw binary tensor blob.

``save_model("dir/topic", model, kind, extra)`` writes ``topic.json`` holding
the model config, task metadata and a tensor index (name/shape/dtype/offset),
and ``topic.bin`` holding the concatenated little-endian arrays.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .nn import ModelConfig

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    kind: str
    model_config: ModelConfig
    extra: dict
    state_dict: dict[str, torch.Tensor]


def save_model(stem: str | Path, model: torch.nn.Module, kind: str, extra: dict) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    tensors = []
    offset = 0
    blobs = []
    for name, tensor in model.state_dict().items():
        arr = np.ascontiguousarray(tensor.detach().cpu().numpy())
        arr = arr.astype(arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        tensors.append(
            {"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str, "offset": offset, "nbytes": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "model_config": asdict(model.cfg),
        "extra": extra,
        "tensors": tensors,
    }
    stem.with_suffix(".json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    stem.with_suffix(".bin").write_bytes(b"".join(blobs))


def load_checkpoint(stem: str | Path) -> Checkpoint:
    stem = Path(stem)
    manifest = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {manifest.get('format_version')!r}")
    blob = stem.with_suffix(".bin").read_bytes()
    state = {}
    for t in manifest["tensors"]:
        arr = np.frombuffer(blob, dtype=np.dtype(t["dtype"]), count=int(np.prod(t["shape"])) if t["shape"] else 1,
                            offset=t["offset"]).reshape(t["shape"])
        state[t["name"]] = torch.from_numpy(arr.copy())
    return Checkpoint(
        kind=manifest["kind"],
        model_config=ModelConfig(**manifest["model_config"]),
        extra=manifest["extra"],
        state_dict=state,
    )


def load_model(stem: str | Path):
    """Rebuild the model a checkpoint was saved from; returns (model, extra)."""
    ckpt = load_checkpoint(stem)
    if ckpt.kind == "topic":
        from .topic import TopicClassifier

        model = TopicClassifier(ckpt.model_config, n_topics=ckpt.extra["n_topics"])
    elif ckpt.kind == "matcher":
        from .matcher import build_matcher

        model = build_matcher(ckpt.model_config, ckpt.extra["variant"])
    elif ckpt.kind == "generator":
        from .generator import build_generator

        model = build_generator(
            ckpt.model_config, ckpt.extra["arch"], ckpt.extra.get("share_embeddings", False)
        )
    else:
        raise ValueError(f"unknown checkpoint kind {ckpt.kind!r}")
    model.load_state_dict(ckpt.state_dict)
    model.eval()
    return model, ckpt.extra
