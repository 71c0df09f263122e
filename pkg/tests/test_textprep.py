import pytest

from kgchat.kg import KnowledgeTriple
from kgchat.textprep import (
    SPECIAL_TOKENS,
    GenSample,
    Tokenizer,
    build_generation_samples,
    build_matching_samples,
    build_topic_samples,
    build_vocab,
    encode_history,
    read_jsonl,
    tokenize,
    write_jsonl,
)


def test_tokenize_mixed_script():
    assert tokenize("hello world") == ["hello", "world"]
    assert tokenize("今天天气 nice") == ["今", "天", "天", "气", "nice"]
    assert tokenize("  spaced   out ") == ["spaced", "out"]


def test_build_vocab_contains_specials_and_tokens():
    tok = build_vocab(["a a b"], min_count=1)
    assert tuple(tok.tokens[:8]) == SPECIAL_TOKENS
    assert "a" in tok.ids and "b" in tok.ids


def test_min_count_maps_rare_to_unk():
    tok = build_vocab(["a a b"], min_count=2)
    assert "b" not in tok.ids
    assert tok.encode("b") == [tok.unk_id]


def test_vocab_deterministic(tmp_path):
    corpus = ["the quick fox", "the slow fox", "a fox"]
    p1, p2 = tmp_path / "v1.json", tmp_path / "v2.json"
    build_vocab(corpus).save(p1)
    build_vocab(corpus).save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_vocab_empty_corpus_errors():
    with pytest.raises(ValueError):
        build_vocab([])


def test_encode_decode_identity(toy_tokenizer):
    text = "Golden Harbor is a romance film ."
    assert toy_tokenizer.decode(toy_tokenizer.encode(text)) == text


def test_tokenizer_round_trip(tmp_path, toy_tokenizer):
    path = tmp_path / "tok.json"
    toy_tokenizer.save(path)
    again = Tokenizer.load(path)
    assert again.tokens == toy_tokenizer.tokens


def test_history_window_keeps_last_ten():
    history = [f"utterance number u{i}" for i in range(12)]
    tok = build_vocab(history)
    text = tok.decode(encode_history(tok, history))
    assert "number u11" in text and "number u2" in text
    assert "u0" not in text.split() and "u1" not in text.split()


def test_single_utterance_shape(toy_tokenizer):
    ids = encode_history(toy_tokenizer, ["Hi !"])
    assert ids[0] == toy_tokenizer.cls_id
    assert ids[-1] == toy_tokenizer.sep_id
    assert len(ids) < 400


def test_front_truncation_to_max_len(toy_tokenizer):
    # force > 400 tokens from 10 long utterances, check against a direct slice
    history = [" ".join(f"w{i}x{j}" for j in range(45)) for i in range(10)]
    ids = encode_history(toy_tokenizer, history, max_len=400)
    assert len(ids) == 400
    full = []
    for utt in history:
        full.extend(toy_tokenizer.encode(utt))
        full.append(toy_tokenizer.sep_id)
    assert ids == [toy_tokenizer.cls_id] + full[-399:]
    # the newest utterance survives in full
    tail = toy_tokenizer.encode(history[-1]) + [toy_tokenizer.sep_id]
    assert ids[-len(tail):] == tail


def test_topic_samples_per_reply_turn(toy_graph, toy_dialogues, toy_tokenizer):
    ds = build_topic_samples(toy_dialogues[:5], toy_graph, toy_tokenizer)
    # toy dialogues have 6 messages, replies at odd indices -> 3 samples each,
    # but every odd turn is annotated and even user turns count as skipped
    assert len(ds.samples) == 15
    assert all(0 <= s.label < len(toy_graph.topics) for s in ds.samples)


def test_topic_samples_single_topic_dialogue(toy_graph, toy_dialogues, toy_tokenizer):
    ds = build_topic_samples(toy_dialogues[:1], toy_graph, toy_tokenizer)
    assert len({s.label for s in ds.samples}) == 1


def test_matching_ratio_1_to_4(toy_graph, toy_dialogues, toy_tokenizer):
    ds = build_matching_samples(toy_dialogues[:10], toy_graph, toy_tokenizer, seed=3)
    pos, neg = ds.counts()
    assert pos * 4 - neg == ds.shortfall
    labels = [s.label for s in ds.samples]
    # builder emits each positive immediately followed by its negatives
    assert labels[:5] == [1, 0, 0, 0, 0]


def test_matching_shortfall_on_tiny_graph(toy_tokenizer):
    from kgchat.kg import KnowledgeGraph
    from kgchat.textprep import Dialogue, Message

    g = KnowledgeGraph.from_triples(
        ["A"],
        [KnowledgeTriple("A", "r1", "x"), KnowledgeTriple("A", "r2", "y"), KnowledgeTriple("A", "r3", "z")],
    )
    dlg = Dialogue(messages=[
        Message(text="tell me about A"),
        Message(text="A r1 x", attrs=[KnowledgeTriple("A", "r1", "x")]),
    ])
    ds = build_matching_samples([dlg], g, toy_tokenizer, neg_ratio=4, seed=0)
    # only 2 distinct negatives exist -> 3 samples, shortfall 2
    assert len(ds.samples) == 3
    assert ds.shortfall == 2


def test_matching_deterministic(toy_graph, toy_dialogues, toy_tokenizer):
    a = build_matching_samples(toy_dialogues[:8], toy_graph, toy_tokenizer, seed=7)
    b = build_matching_samples(toy_dialogues[:8], toy_graph, toy_tokenizer, seed=7)
    assert a.samples == b.samples
    c = build_matching_samples(toy_dialogues[:8], toy_graph, toy_tokenizer, seed=8)
    assert a.samples != c.samples


def test_generation_samples_ratio_and_negatives(toy_graph, toy_dialogues, toy_tokenizer):
    ds = build_generation_samples(toy_dialogues[:40], toy_graph, toy_tokenizer, seed=0)
    pos = [s for s in ds.samples if s.label == 1]
    neg = [s for s in ds.samples if s.label == 0]
    assert len(pos) == len(neg) == 120  # 40 dialogues x 3 gold turns
    by_key = {(s.history, s.knowledge): s.reply for s in pos}
    for s in neg:
        assert s.reply != by_key[(s.history, s.knowledge)]


def test_generation_single_dialogue_flagged(toy_graph, toy_dialogues, toy_tokenizer):
    ds = build_generation_samples(toy_dialogues[:1], toy_graph, toy_tokenizer, seed=0)
    assert ds.single_dialogue_fallback


def test_generation_deterministic(toy_graph, toy_dialogues, toy_tokenizer):
    a = build_generation_samples(toy_dialogues[:10], toy_graph, toy_tokenizer, seed=5)
    b = build_generation_samples(toy_dialogues[:10], toy_graph, toy_tokenizer, seed=5)
    assert a.samples == b.samples


def test_jsonl_round_trip(tmp_path, toy_graph, toy_dialogues, toy_tokenizer):
    ds = build_generation_samples(toy_dialogues[:3], toy_graph, toy_tokenizer, seed=0)
    path = tmp_path / "gen.jsonl"
    write_jsonl(path, ds.samples)
    back = read_jsonl(path)
    assert back == ds.samples
    assert isinstance(back[0], GenSample)
