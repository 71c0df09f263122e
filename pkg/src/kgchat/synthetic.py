"""Deterministic toy world: a small film knowledge graph plus scripted dialogues.

Used by the test suite, the acceptance harness, and the demo server. The
world is fully determined by the seed. Two topic names ("It", "Up") collide
with common stop words on purpose: a score-based recall that filters stop
words cannot see them, while the longest-match and automaton recalls can,
which mirrors how the recall algorithms separate on real data. The pair
"Starlight" / "Starlight Rising" exercises overlapping dictionary entries.
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from .kg import KnowledgeGraph, KnowledgeTriple
from .textprep import Dialogue, Message, save_corpus

TOPIC_NAMES = [
    "Golden Harbor", "Iron Meadow", "Silent Comet", "Crimson Orchard",
    "Velvet Horizon", "Vivid Empire", "Amber Outpost", "Frozen Lantern",
    "Hollow Summit", "Paper Tempest", "Lunar Bazaar", "Quiet Forge",
    "Scarlet Monsoon", "Marble Tide", "Ashen Voyage", "Neon Prairie",
    "Starlight", "Starlight Rising", "It", "Up",
]

GENRES = ["drama", "comedy", "thriller", "romance", "mystery", "western"]
PEOPLE = [
    "Mira Voss", "Omar Reyes", "Tessa Lin", "Hugo Bram",
    "Ida Kranz", "Leo Marsh", "Nina Petrov", "Caleb Ondo",
]
COUNTRIES = ["Norway", "Chile", "Kenya", "Japan", "Canada", "Poland"]

RELATIONS = ["genre", "director", "star", "year", "rating", "country"]

OPENERS = ["Hi !", "Hello there .", "Good evening ."]

ASK_TEMPLATES = {
    "genre": "What is the genre of {t} ?",
    "director": "Who is the director of {t} ?",
    "star": "Who is the star of {t} ?",
    "year": "Which year did {t} come out ?",
    "rating": "What is the rating of {t} ?",
    "country": "Which country made {t} ?",
}

REPLY_TEMPLATES = {
    "genre": "{t} is a {v} film .",
    "director": "{t} was directed by {v} .",
    "star": "{v} is the star of {t} .",
    "year": "{t} came out in {v} .",
    "rating": "{t} has a rating of {v} .",
    "country": "{t} was made in {v} .",
}


def make_toy_graph(seed: int = 0) -> KnowledgeGraph:
    rng = random.Random(seed)
    records = []
    for i, topic in enumerate(TOPIC_NAMES):
        kb = [
            KnowledgeTriple(topic, "genre", rng.choice(GENRES)),
            KnowledgeTriple(topic, "director", rng.choice(PEOPLE)),
            KnowledgeTriple(topic, "star", rng.choice(PEOPLE)),
            KnowledgeTriple(topic, "year", str(rng.randint(1988, 2023))),
            KnowledgeTriple(topic, "rating", f"{rng.randint(58, 94) / 10:.1f}"),
            KnowledgeTriple(topic, "country", rng.choice(COUNTRIES)),
        ]
        if i % 4 == 0:
            kb.append(KnowledgeTriple(topic, "related_to", TOPIC_NAMES[(i + 7) % len(TOPIC_NAMES)]))
        records.append((topic, kb))
    return KnowledgeGraph(records)


def make_toy_dialogues(graph: KnowledgeGraph, n_dialogues: int = 200, seed: int = 0) -> list[Dialogue]:
    """Scripted Q/A dialogues: every bot reply is grounded in one triple.

    Each dialogue covers one topic and three distinct relations; the
    (topic, relation sequence) combinations are unique so no two dialogues
    share an identical annotated history.
    """
    rng = random.Random(seed + 1)
    sequences = list(itertools.permutations(RELATIONS, 3))
    per_topic: dict[str, list[tuple[str, ...]]] = {}
    for topic in graph.topics:
        seqs = list(sequences)
        rng.shuffle(seqs)
        per_topic[topic] = seqs

    dialogues = []
    for d in range(n_dialogues):
        topic = graph.topics[d % len(graph.topics)]
        rels = per_topic[topic].pop()
        facts = {tr.relation: tr for tr in graph.triples_for(topic)}
        messages = []
        for k, rel in enumerate(rels):
            ask = ASK_TEMPLATES[rel].format(t=topic)
            if k == 0:
                ask = f"{rng.choice(OPENERS)} {ask}"
            elif rng.random() < 0.4:
                # distractor mention of another topic, so recall has to rank
                other = rng.choice([t for t in graph.topics if t != topic])
                ask = f"I liked {other} more , but fine . {ask}"
            messages.append(Message(text=ask))
            tr = facts[rel]
            messages.append(Message(text=REPLY_TEMPLATES[rel].format(t=topic, v=tr.tail), attrs=[tr]))
        dialogues.append(Dialogue(messages=messages))
    return dialogues


def make_toy_world(seed: int = 0, n_dialogues: int = 200) -> tuple[KnowledgeGraph, list[Dialogue]]:
    graph = make_toy_graph(seed)
    return graph, make_toy_dialogues(graph, n_dialogues, seed)


def split_dialogues(dialogues: list[Dialogue], train_frac: float = 0.8, seed: int = 0):
    """Shuffled train/held-out split at dialogue granularity."""
    order = list(range(len(dialogues)))
    random.Random(seed + 2).shuffle(order)
    cut = int(len(dialogues) * train_frac)
    train = [dialogues[i] for i in order[:cut]]
    held = [dialogues[i] for i in order[cut:]]
    return train, held


def recall_eval_samples(dialogues: list[Dialogue], graph: KnowledgeGraph, max_sent: int = 10):
    """(history text, gold topic) pairs for the recall accuracy harness."""
    samples = []
    for dlg in dialogues:
        for i in range(1, len(dlg.messages)):
            msg = dlg.messages[i]
            gold = next((tr.head for tr in msg.attrs if graph.is_topic(tr.head)), None)
            if gold is None:
                continue
            window = [m.text for m in dlg.messages[:i]][-max_sent:]
            samples.append((" ".join(window), gold))
    return samples


def write_toy_world(outdir: str | Path, seed: int = 0, n_dialogues: int = 200) -> dict[str, Path]:
    """Write knowledge.json plus full/train/valid dialogue files; returns the paths."""
    from .kg import save_graph

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    graph, dialogues = make_toy_world(seed, n_dialogues)
    train, valid = split_dialogues(dialogues, seed=seed)
    paths = {
        "graph": outdir / "knowledge.json",
        "dialogues": outdir / "dialogues.json",
        "train": outdir / "train.json",
        "valid": outdir / "valid.json",
    }
    save_graph(graph, paths["graph"])
    save_corpus(dialogues, paths["dialogues"])
    save_corpus(train, paths["train"])
    save_corpus(valid, paths["valid"])
    return paths
