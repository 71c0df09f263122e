import json

import pytest
import torch

from kgchat.checkpoint import load_checkpoint, load_model, save_model
from kgchat.generator import build_generator, build_generator_input, generate
from kgchat.matcher import build_matcher
from kgchat.nn import ModelConfig
from kgchat.topic import build_topic_model, predict_topic_scores
from kgchat.textprep import encode_history


def _cfg(toy_tokenizer):
    return ModelConfig(vocab_size=len(toy_tokenizer), d_model=32, n_layers=1, n_heads=2, max_positions=128)


def test_topic_round_trip(tmp_path, toy_graph, toy_tokenizer):
    model = build_topic_model(_cfg(toy_tokenizer), len(toy_graph.topics), seed=11)
    save_model(tmp_path / "topic", model, "topic", {"n_topics": len(toy_graph.topics)})
    again, extra = load_model(tmp_path / "topic")
    assert extra["n_topics"] == len(toy_graph.topics)
    for (n1, p1), (n2, p2) in zip(model.state_dict().items(), again.state_dict().items()):
        assert n1 == n2
        assert torch.equal(p1, p2)
    ids = encode_history(toy_tokenizer, ["What is the genre of Up ?"])
    a = predict_topic_scores(model, ids).scores
    b = predict_topic_scores(again, ids).scores
    assert (a == b).all()


def test_matcher_variant_restored(tmp_path, toy_tokenizer):
    model = build_matcher(_cfg(toy_tokenizer), "twin-diff", seed=12)
    save_model(tmp_path / "matcher", model, "matcher", {"variant": "twin-diff"})
    again, extra = load_model(tmp_path / "matcher")
    assert extra["variant"] == "twin-diff"
    assert again.history_encoder is not again.knowledge_encoder


def test_generator_round_trip_same_output(tmp_path, toy_tokenizer):
    model = build_generator(_cfg(toy_tokenizer), "encdec", share_embeddings=True, seed=13)
    save_model(tmp_path / "generator", model, "generator", {"arch": "encdec", "share_embeddings": True})
    again, _ = load_model(tmp_path / "generator")
    assert again.encoder.embeddings.token.weight is again.decoder.embeddings.token.weight
    gi = build_generator_input(
        toy_tokenizer, [toy_tokenizer.encode("Up genre drama")], [toy_tokenizer.encode("Hi !")]
    )
    assert generate(model, gi, toy_tokenizer, max_new_tokens=6).tokens == \
        generate(again, gi, toy_tokenizer, max_new_tokens=6).tokens


def test_manifest_shape(tmp_path, toy_tokenizer):
    model = build_matcher(_cfg(toy_tokenizer), "twin", seed=14)
    save_model(tmp_path / "m", model, "matcher", {"variant": "twin"})
    manifest = json.loads((tmp_path / "m.json").read_text())
    assert manifest["format_version"] == 1
    assert manifest["kind"] == "matcher"
    total = sum(t["nbytes"] for t in manifest["tensors"])
    assert (tmp_path / "m.bin").stat().st_size == total
    for t in manifest["tensors"]:
        assert set(t) == {"name", "shape", "dtype", "offset", "nbytes"}


def test_version_check(tmp_path, toy_tokenizer):
    model = build_matcher(_cfg(toy_tokenizer), "twin", seed=15)
    save_model(tmp_path / "m", model, "matcher", {"variant": "twin"})
    manifest = json.loads((tmp_path / "m.json").read_text())
    manifest["format_version"] = 99
    (tmp_path / "m.json").write_text(json.dumps(manifest))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(tmp_path / "m")
