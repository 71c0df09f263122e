"""Inference orchestration: recall -> topic -> rank -> generate, per session.

Sessions hold an append-only history and a memory unit (topics and triples
selected on earlier turns). The memory merges into the recalled topic set
before best-topic selection, and knowledge identical to the previous turn's
selection is excluded from re-ranking so consecutive replies vary.

Exposed as a plain Python API (chat_turn), an interactive REPL (see cli),
and an HTTP JSON API (create_app).
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

from pydantic import BaseModel


class SessionIn(BaseModel):
    config: dict | None = None


class MessageIn(BaseModel):
    text: str

from .generator import GenerationOutput, build_generator_input, generate
from .kg import KnowledgeGraph, KnowledgeTriple, TopicSet, expand_related_topics, knowledge_for_topics, load_graph
from .matcher import rank_knowledge
from .recall import ALGORITHMS, RecallIndex, build_index, recall as run_recall
from .textprep import Tokenizer, encode_history, history_window_text
from .topic import predict_topic_scores, select_best_topic, select_topic_knowledge


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    recall_algo: str = "lexical"
    n_recall: int = 50
    top_n_knowledge: int = 1
    decode: str = "greedy"
    beam_width: int = 4
    max_history: int = 10
    max_len: int = 400
    max_new_tokens: int = 40

    def __post_init__(self):
        if self.recall_algo not in ALGORITHMS:
            raise ValueError(f"recall_algo must be one of {ALGORITHMS}")
        if self.top_n_knowledge not in (1, 3):
            raise ValueError("top_n_knowledge must be 1 or 3")
        if self.decode not in ("greedy", "beam"):
            raise ValueError("decode must be 'greedy' or 'beam'")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def merged(self, overrides: dict | None) -> "PipelineConfig":
        if not overrides:
            return self
        data = asdict(self)
        unknown = set(overrides) - set(data)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update(overrides)
        return PipelineConfig(**data)


@dataclass
class TurnTrace:
    turn: int
    user_text: str
    recalled_topics: list[str]
    topic_scores: list[tuple[str, float]]   # top 10, score-desc
    best_topic: str | None
    n_candidates: int                        # triples recalled for the merged topic set
    n_topic_candidates: int                  # triples of the best topic among them
    ranked: list[dict]                       # full ranking with scores
    selected: list[dict]
    generator_input: str
    reply: str
    fallback: str | None
    timings_ms: dict[str, float]

    def as_dict(self) -> dict:
        return asdict(self)

    def replay_fields(self) -> dict:
        """Everything except wall-clock timings; equal across identical replays."""
        d = self.as_dict()
        d.pop("timings_ms")
        return d


@dataclass
class Session:
    id: str
    config: PipelineConfig
    history: list[str] = field(default_factory=list)
    memory_topics: list[str] = field(default_factory=list)
    last_selected: list[KnowledgeTriple] = field(default_factory=list)
    traces: list[TurnTrace] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def _triple_dict(tr: KnowledgeTriple, score: float | None = None) -> dict:
    d = {"head": tr.head, "relation": tr.relation, "tail": tr.tail}
    if score is not None:
        d["score"] = score
    return d


class PipelineRuntime:
    """Shared immutable models and indexes; sessions are independent."""

    def __init__(
        self,
        graph: KnowledgeGraph,
        tokenizer: Tokenizer,
        topic_model,
        matcher_model,
        generator_model,
        config: PipelineConfig | None = None,
        corpus_docs: list[str] | None = None,
    ):
        self.graph = graph
        self.tokenizer = tokenizer
        self.topic_model = topic_model
        self.matcher_model = matcher_model
        self.generator_model = generator_model
        self.config = config or PipelineConfig()
        self._corpus_docs = corpus_docs
        self._indexes: dict[str, RecallIndex] = {}

    def recall_index(self, algorithm: str) -> RecallIndex:
        if algorithm not in self._indexes:
            self._indexes[algorithm] = build_index(self.graph, algorithm, corpus=self._corpus_docs)
        return self._indexes[algorithm]

    # ---- stage helpers (session-free; evaluation uses these directly) ----

    def _select_stage(self, history: list[str], memory_topics: list[str], config: PipelineConfig):
        window = history_window_text(history, config.max_history)
        t0 = run_recall(self.recall_index(config.recall_algo), window, config.n_recall)
        selection = list(t0.topics) + [m for m in memory_topics if m not in t0.topics]
        fallback = None
        history_ids = encode_history(self.tokenizer, history, config.max_history, config.max_len)
        scores = predict_topic_scores(
            self.topic_model, history_ids, apply_softmax=False, n_topics=len(self.graph.topics)
        )
        if selection:
            expanded = expand_related_topics(self.graph, TopicSet(tuple(selection), origin="memory"))
            pool = knowledge_for_topics(self.graph, expanded)
            best = select_best_topic(scores, selection, self.graph)
        else:
            fallback = "global-argmax"
            best = self.graph.topics[int(scores.scores.argmax())]
            pool = knowledge_for_topics(self.graph, [best])
        topic_k = select_topic_knowledge(self.graph, pool, best)
        if not topic_k.triples and best is not None:
            topic_k.triples = self.graph.triples_for(best)
            if topic_k.triples:
                fallback = (fallback + "+" if fallback else "") + "graph-triples"
        return t0, scores, best, pool, topic_k, history_ids, fallback

    def _rank_stage(self, history_ids, candidates: list[KnowledgeTriple], exclude: list[KnowledgeTriple]):
        pool = [t for t in candidates if t not in exclude]
        if not pool:
            pool = candidates
        return rank_knowledge(self.matcher_model, self.tokenizer, history_ids, pool, top_n=len(pool))

    def recalled_knowledge(self, history: list[str], top_k: int) -> list[KnowledgeTriple]:
        """End-to-end recall -> topic -> rank; top-k triples for evaluation."""
        config = self.config
        _, _, _, _, topic_k, history_ids, _ = self._select_stage(history, [], config)
        ranked = self._rank_stage(history_ids, topic_k.triples, [])
        return ranked.triples()[:top_k]

    def generate_from(self, history: list[str], triples: list[KnowledgeTriple]) -> GenerationOutput:
        config = self.config
        if not triples:
            raise StageError("generate", "no knowledge selected")
        gen_input = build_generator_input(
            self.tokenizer,
            [self.tokenizer.encode(t.text()) for t in triples],
            [self.tokenizer.encode(u) for u in history[-config.max_history:]],
            config.max_len,
        )
        return generate(
            self.generator_model, gen_input, self.tokenizer,
            decode=config.decode, beam_width=config.beam_width,
            max_new_tokens=config.max_new_tokens,
        )

    # ---- the full per-turn pipeline ----

    def chat_turn(self, session: Session, text: str) -> tuple[str, TurnTrace]:
        if not text or not text.strip():
            raise StageError("input", "utterance must be non-empty")
        with session.lock:
            config = session.config
            history = session.history + [text]
            timings: dict[str, float] = {}

            t_start = time.perf_counter()
            try:
                t0, scores, best, pool, topic_k, history_ids, fallback = self._select_stage(
                    history, session.memory_topics, config
                )
            except StageError:
                raise
            except Exception as exc:
                raise StageError("select", str(exc)) from exc
            timings["select"] = (time.perf_counter() - t_start) * 1e3

            t_rank = time.perf_counter()
            try:
                if not topic_k.triples:
                    raise StageError("rank", f"no knowledge available for topic {best!r}")
                ranked = self._rank_stage(history_ids, topic_k.triples, session.last_selected)
            except StageError:
                raise
            except Exception as exc:
                raise StageError("rank", str(exc)) from exc
            timings["rank"] = (time.perf_counter() - t_rank) * 1e3

            selected = ranked.items[: config.top_n_knowledge]
            t_gen = time.perf_counter()
            try:
                gen_input = build_generator_input(
                    self.tokenizer,
                    [self.tokenizer.encode(t.text()) for t, _ in selected],
                    [self.tokenizer.encode(u) for u in history[-config.max_history:]],
                    config.max_len,
                )
                out = generate(
                    self.generator_model, gen_input, self.tokenizer,
                    decode=config.decode, beam_width=config.beam_width,
                    max_new_tokens=config.max_new_tokens,
                )
            except StageError:
                raise
            except Exception as exc:
                raise StageError("generate", str(exc)) from exc
            timings["generate"] = (time.perf_counter() - t_gen) * 1e3

            reply = self.tokenizer.decode(out.tokens)
            top_ids = scores.scores.argsort()[::-1][:10]
            trace = TurnTrace(
                turn=len(session.traces),
                user_text=text,
                recalled_topics=list(t0.topics),
                topic_scores=[(self.graph.topics[i], float(scores.scores[i])) for i in top_ids],
                best_topic=best,
                n_candidates=len(pool),
                n_topic_candidates=len(topic_k.triples),
                ranked=[_triple_dict(t, s.value) for t, s in ranked.items],
                selected=[_triple_dict(t, s.value) for t, s in selected],
                generator_input=self.tokenizer.decode(gen_input.ids, skip_special=False),
                reply=reply,
                fallback=fallback,
                timings_ms=timings,
            )

            # mutate only after every stage succeeded
            session.history.extend([text, reply])
            if best is not None and best not in session.memory_topics:
                session.memory_topics.append(best)
            session.last_selected = [t for t, _ in selected]
            session.traces.append(trace)
            return reply, trace


class SessionStore:
    def __init__(self, runtime: PipelineRuntime):
        self.runtime = runtime
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, overrides: dict | None = None) -> Session:
        config = self.runtime.config.merged(overrides)
        session = Session(id=uuid.uuid4().hex[:12], config=config)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def get_trace(self, session_id: str, turn: int) -> TurnTrace:
        session = self.get(session_id)
        if not 0 <= turn < len(session.traces):
            raise IndexError(turn)
        return session.traces[turn]


# --------------------------------------------------------------------------
# HTTP API
# --------------------------------------------------------------------------

def create_app(runtime: PipelineRuntime, ui_dir: str | Path | None = None):
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware

    store = SessionStore(runtime)
    app = FastAPI(title="kgchat")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "topics": len(runtime.graph.topics)}

    @app.post("/sessions")
    def create_session(body: SessionIn | None = None):
        try:
            session = store.create(body.config if body else None)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"id": session.id}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn):
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        try:
            reply, trace = runtime.chat_turn(session, body.text)
        except StageError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"reply": reply, "turn": trace.turn}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        return {
            "id": session.id,
            "history": list(session.history),
            "turns": len(session.traces),
            "memory_topics": list(session.memory_topics),
        }

    @app.get("/sessions/{session_id}/trace/{turn}")
    def get_trace(session_id: str, turn: int):
        try:
            trace = store.get_trace(session_id, turn)
        except (KeyError, IndexError):
            raise HTTPException(status_code=404, detail="unknown session or turn")
        return trace.as_dict()

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


# --------------------------------------------------------------------------
# Runtime loading
# --------------------------------------------------------------------------

def load_runtime(
    graph_path: str | Path,
    ckpt_dir: str | Path,
    config: PipelineConfig | None = None,
    corpus_path: str | Path | None = None,
) -> PipelineRuntime:
    """Load graph, tokenizer and the three checkpoints from a directory."""
    from .checkpoint import load_model

    ckpt_dir = Path(ckpt_dir)
    graph = load_graph(graph_path)
    tokenizer = Tokenizer.load(ckpt_dir / "tokenizer.json")
    topic_model, _ = load_model(ckpt_dir / "topic")
    matcher_model, _ = load_model(ckpt_dir / "matcher")
    generator_model, _ = load_model(ckpt_dir / "generator")
    corpus_docs = None
    if corpus_path is not None:
        from .textprep import load_corpus

        corpus_docs = [" ".join(m.text for m in d.messages) for d in load_corpus(corpus_path)]
    return PipelineRuntime(graph, tokenizer, topic_model, matcher_model, generator_model, config, corpus_docs)


def demo_runtime(seed: int = 0, config: PipelineConfig | None = None) -> PipelineRuntime:
    """Runtime over the bundled toy world with seeded untrained toy models.

    Deterministic and instant; useful for exercising the service and UI
    plumbing without a training run.
    """
    from .matcher import build_matcher
    from .generator import build_generator
    from .nn import ModelConfig
    from .synthetic import make_toy_world
    from .textprep import build_vocab
    from .topic import build_topic_model

    graph, dialogues = make_toy_world(seed=seed)
    texts = [m.text for d in dialogues for m in d.messages] + [t.text() for t in graph.triples]
    tokenizer = build_vocab(texts)
    cfg = ModelConfig(vocab_size=len(tokenizer))
    topic_model = build_topic_model(cfg, len(graph.topics), seed=seed)
    matcher_model = build_matcher(cfg, "twin", seed=seed)
    generator_model = build_generator(cfg, "encdec", seed=seed)
    docs = [" ".join(m.text for m in d.messages) for d in dialogues]
    return PipelineRuntime(graph, tokenizer, topic_model, matcher_model, generator_model, config, docs)
