import pytest

from kgchat.nn import ModelConfig
from kgchat.synthetic import make_toy_world
from kgchat.textprep import build_vocab


@pytest.fixture(scope="session")
def toy_world():
    return make_toy_world(seed=0, n_dialogues=200)


@pytest.fixture(scope="session")
def toy_graph(toy_world):
    return toy_world[0]


@pytest.fixture(scope="session")
def toy_dialogues(toy_world):
    return toy_world[1]


@pytest.fixture(scope="session")
def toy_tokenizer(toy_world):
    graph, dialogues = toy_world
    texts = [m.text for d in dialogues for m in d.messages] + [t.text() for t in graph.triples]
    return build_vocab(texts)


@pytest.fixture(scope="session")
def toy_docs(toy_dialogues):
    return [" ".join(m.text for m in d.messages) for d in toy_dialogues]


@pytest.fixture()
def tiny_cfg(toy_tokenizer):
    return ModelConfig(vocab_size=len(toy_tokenizer), d_model=32, n_layers=1, n_heads=2, max_positions=128)
