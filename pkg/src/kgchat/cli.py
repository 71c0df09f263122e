"""Console entry points: data prep, training, evaluation, REPL, and server."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .kg import load_graph
from .metrics import generation_report, render_table, selection_accuracy_at_n
from .nn import ModelConfig, TrainConfig
from .service import PipelineConfig, Session, demo_runtime, load_runtime
from .textprep import build_vocab, load_corpus, Tokenizer
from .textprep import build_generation_samples, build_matching_samples, build_topic_samples


def _read_train_config(path: str | None) -> tuple[dict, dict]:
    if not path:
        return {}, {}
    cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    return cfg.get("model", {}), cfg.get("train", {})


def _load_data_dir(data_dir: str):
    data = Path(data_dir)
    graph = load_graph(data / "knowledge.json")
    train = load_corpus(data / "train.json")
    valid_path = data / "valid.json"
    valid = load_corpus(valid_path) if valid_path.exists() else []
    return graph, train, valid


def _fit_tokenizer(graph, dialogues) -> Tokenizer:
    texts = [m.text for d in dialogues for m in d.messages] + [t.text() for t in graph.triples]
    return build_vocab(texts)


def _log(epoch: int, loss: float) -> None:
    print(f"  epoch {epoch}: loss {loss:.4f}", file=sys.stderr)


# --------------------------------------------------------------------------

def recall_bench_main(argv=None) -> int:
    from . import recall as rc
    from .textprep import history_window_text

    p = argparse.ArgumentParser(prog="recall-bench", description="Accuracy-vs-n harness for the recall algorithms")
    p.add_argument("--algo", choices=list(rc.ALGORITHMS) + ["all"], default="all")
    p.add_argument("--n-max", type=int, default=50)
    p.add_argument("--corpus", required=True, help="dialogue corpus JSON")
    p.add_argument("--graph", required=True, help="knowledge JSON")
    p.add_argument("--out", required=True, help="output CSV (algo,n,accuracy_percent,T)")
    args = p.parse_args(argv)

    graph = load_graph(args.graph)
    dialogues = load_corpus(args.corpus)
    samples = []
    for dlg in dialogues:
        for i in range(1, len(dlg.messages)):
            gold = next((t.head for t in dlg.messages[i].attrs if graph.is_topic(t.head)), None)
            if gold is None:
                continue
            samples.append((history_window_text([m.text for m in dlg.messages[:i]]), gold))
    if not samples:
        print("corpus has no annotated reply turns", file=sys.stderr)
        return 1
    docs = [" ".join(m.text for m in d.messages) for d in dialogues]
    algos = list(rc.ALGORITHMS) if args.algo == "all" else [args.algo]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algo", "n", "accuracy_percent", "T"])
        for algo in algos:
            index = rc.build_index(graph, algo, corpus=docs)
            curve = rc.accuracy_curve(index, samples, args.n_max)
            for n, acc in enumerate(curve, start=1):
                writer.writerow([algo, n, f"{acc:.4f}", len(samples)])
            print(f"{algo}: acc@1={curve[0]:.2f}% acc@{args.n_max}={curve[-1]:.2f}% (T={len(samples)})")
    print(f"wrote {args.out}")
    return 0


def train_topic_main(argv=None) -> int:
    from .checkpoint import save_model
    from .topic import topic_accuracy, train_topic_model

    p = argparse.ArgumentParser(prog="train-topic")
    p.add_argument("--data", required=True, help="directory with knowledge.json/train.json[/valid.json]")
    p.add_argument("--config", help="JSON file with {model: {...}, train: {...}}")
    p.add_argument("--out", required=True, help="checkpoint directory")
    args = p.parse_args(argv)

    graph, train, valid = _load_data_dir(args.data)
    tokenizer = _fit_tokenizer(graph, train)
    model_kw, train_kw = _read_train_config(args.config)
    model_cfg = ModelConfig(vocab_size=len(tokenizer), **model_kw)
    train_cfg = TrainConfig(**{"epochs": 5, **train_kw})

    train_ds = build_topic_samples(train, graph, tokenizer)
    model = train_topic_model(train_ds.samples, len(graph.topics), model_cfg, train_cfg, log=_log)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tokenizer.save(out / "tokenizer.json")
    save_model(out / "topic", model, "topic", {"n_topics": len(graph.topics)})

    reports = [{"split": "train", "accuracy": round(topic_accuracy(model, train_ds.samples), 2)}]
    if valid:
        valid_ds = build_topic_samples(valid, graph, tokenizer)
        reports.append({"split": "valid", "accuracy": round(topic_accuracy(model, valid_ds.samples), 2)})
    for r in reports:
        print(json.dumps(r))
    print(render_table(["split", "accuracy"], [[r["split"], r["accuracy"]] for r in reports]), file=sys.stderr)
    return 0


def train_matcher_main(argv=None) -> int:
    from .checkpoint import save_model
    from .matcher import make_pairwise_samples, matcher_accuracy, pairwise_accuracy, train_matcher

    p = argparse.ArgumentParser(prog="train-matcher")
    p.add_argument("--variant", choices=["twin", "twin-diff", "pairwise"], default="twin")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--neg-ratio", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    graph, train, valid = _load_data_dir(args.data)
    tokenizer = _fit_tokenizer(graph, train)
    model_kw, train_kw = _read_train_config(args.config)
    model_cfg = ModelConfig(vocab_size=len(tokenizer), **model_kw)
    train_cfg = TrainConfig(**{"epochs": 3, "seed": args.seed, **train_kw})

    train_ds = build_matching_samples(train, graph, tokenizer, neg_ratio=args.neg_ratio, seed=args.seed)
    model = train_matcher(train_ds, args.variant, tokenizer, model_cfg, train_cfg, log=_log)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tokenizer.save(out / "tokenizer.json")
    save_model(out / "matcher", model, "matcher", {"variant": args.variant})

    def split_report(name, dialogues):
        ds = build_matching_samples(dialogues, graph, tokenizer, neg_ratio=args.neg_ratio, seed=args.seed)
        if args.variant == "pairwise":
            acc = pairwise_accuracy(model, make_pairwise_samples(ds, tokenizer, seed=args.seed))
        else:
            acc = matcher_accuracy(model, ds.samples)
        return {"model": args.variant, "split": name, "accuracy": round(acc, 2)}

    reports = [split_report("train", train)] + ([split_report("valid", valid)] if valid else [])
    for r in reports:
        print(json.dumps(r))
    return 0


def eval_selection_main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="eval-selection", description="Knowledge selection accuracy@n, end to end")
    p.add_argument("--at", default="1,3,5", help="comma-separated cut points")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--algo", choices=["tfidf", "lexical", "ac"], default="lexical")
    p.add_argument("--split", choices=["train", "valid"], default="valid")
    args = p.parse_args(argv)

    ns = tuple(int(x) for x in args.at.split(","))
    graph, train, valid = _load_data_dir(args.data)
    dialogues = valid if args.split == "valid" and valid else train
    config = PipelineConfig(recall_algo=args.algo)
    runtime = load_runtime(Path(args.data) / "knowledge.json", args.ckpt_dir, config,
                           corpus_path=Path(args.data) / "train.json")

    from .matcher import rank_knowledge
    from .textprep import encode_history

    ranked_e2e, ranked_cond, golds = [], [], []
    for dlg in dialogues:
        for i in range(1, len(dlg.messages)):
            gold = [t for t in dlg.messages[i].attrs if graph.is_topic(t.head)]
            if not gold:
                continue
            history = [m.text for m in dlg.messages[:i]]
            golds.append(gold)
            ranked_e2e.append(runtime.recalled_knowledge(history, max(ns)))
            history_ids = encode_history(runtime.tokenizer, history)
            cond = rank_knowledge(runtime.matcher_model, runtime.tokenizer, history_ids,
                                  graph.triples_for(gold[0].head), top_n=max(ns))
            ranked_cond.append(cond.triples())
    report = {
        "split": args.split,
        "T": len(golds),
        "end_to_end": {str(n): round(v, 2) for n, v in selection_accuracy_at_n(ranked_e2e, golds, ns).items()},
        "given_gold_topic": {str(n): round(v, 2) for n, v in selection_accuracy_at_n(ranked_cond, golds, ns).items()},
    }
    print(json.dumps(report, indent=1))
    return 0


def train_gen_main(argv=None) -> int:
    from .checkpoint import save_model
    from .generator import build_generator_input, generate, train_generator

    p = argparse.ArgumentParser(prog="train-gen")
    p.add_argument("--arch", choices=["encdec", "deconly"], default="encdec")
    p.add_argument("--kb", type=int, default=1, help="knowledge pieces per sample (1 or 3)")
    p.add_argument("--nsp", action="store_true", help="add the reply-suitability task")
    p.add_argument("--share", action="store_true", help="share encoder/decoder embeddings")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    graph, train, valid = _load_data_dir(args.data)
    tokenizer = _fit_tokenizer(graph, train)
    model_kw, train_kw = _read_train_config(args.config)
    model_cfg = ModelConfig(vocab_size=len(tokenizer), **model_kw)
    train_cfg = TrainConfig(**{"epochs": 10, "seed": args.seed, **train_kw})

    ds = build_generation_samples(train, graph, tokenizer, seed=args.seed)
    model = train_generator(
        ds.samples, tokenizer, arch=args.arch, share_embeddings=args.share,
        m=args.kb, use_nsp=args.nsp, model_cfg=model_cfg, train_cfg=train_cfg, log=_log,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tokenizer.save(out / "tokenizer.json")
    save_model(out / "generator", model, "generator",
               {"arch": args.arch, "share_embeddings": args.share, "kb": args.kb, "nsp": args.nsp})

    eval_dialogues = valid if valid else train
    pairs = []
    for dlg in eval_dialogues:
        for i in range(1, len(dlg.messages)):
            gold = [t for t in dlg.messages[i].attrs if graph.is_topic(t.head)]
            if not gold:
                continue
            history = [m.text for m in dlg.messages[:i]]
            gi = build_generator_input(tokenizer, [tokenizer.encode(t.text()) for t in gold[: args.kb]],
                                       [tokenizer.encode(u) for u in history[-10:]])
            hyp = generate(model, gi, tokenizer).tokens
            pairs.append((hyp, tokenizer.encode(dlg.messages[i].text)))
    condition = f"{args.arch}+{args.kb}kb" + ("+nsp" if args.nsp else "") + ("+share" if args.share else "")
    print(json.dumps(generation_report(condition, pairs).as_dict()))
    return 0


def generate_main(argv=None) -> int:
    from .checkpoint import load_model
    from .generator import build_generator_input, generate

    p = argparse.ArgumentParser(prog="generate")
    p.add_argument("--ckpt", required=True, help="generator checkpoint stem (tokenizer.json beside it)")
    p.add_argument("--graph", required=True)
    p.add_argument("--kb", type=int, default=1)
    p.add_argument("--interactive", action="store_true")
    args = p.parse_args(argv)

    graph = load_graph(args.graph)
    stem = Path(args.ckpt)
    tokenizer = Tokenizer.load(stem.parent / "tokenizer.json")
    model, _ = load_model(stem)

    def reply_for(topic: str, utterance: str) -> str:
        triples = graph.triples_for(topic)[: args.kb]
        if not triples:
            return f"(no knowledge for topic {topic!r})"
        gi = build_generator_input(tokenizer, [tokenizer.encode(t.text()) for t in triples],
                                   [tokenizer.encode(utterance)])
        return tokenizer.decode(generate(model, gi, tokenizer).tokens)

    if args.interactive:
        print("topics:", ", ".join(graph.topics[:10]), "..." if len(graph.topics) > 10 else "")
        while True:
            try:
                topic = input("topic> ").strip()
                if not topic:
                    break
                utterance = input("you> ").strip()
            except (EOFError, KeyboardInterrupt):
                break
            print("bot>", reply_for(topic, utterance))
        return 0
    for line in sys.stdin:
        rec = json.loads(line)
        print(json.dumps({"reply": reply_for(rec["topic"], rec["utterance"])}, ensure_ascii=False))
    return 0


def _build_repl_runtime(args) -> "PipelineRuntime":
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.algo:
        overrides["recall_algo"] = args.algo
    if args.kb:
        overrides["top_n_knowledge"] = args.kb
    config = PipelineConfig(**overrides)
    if args.demo:
        return demo_runtime(config=config)
    return load_runtime(args.graph, args.ckpt_dir, config, corpus_path=args.corpus)


def dialog_main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="dialog", description="Interactive pipeline REPL (/trace shows the last turn)")
    p.add_argument("--graph")
    p.add_argument("--ckpt-dir")
    p.add_argument("--algo", choices=["tfidf", "lexical", "ac"])
    p.add_argument("--kb", type=int, choices=[1, 3])
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--corpus", help="dialogue corpus (needed for tfidf document frequencies)")
    p.add_argument("--demo", action="store_true", help="bundled toy world with untrained seeded models")
    args = p.parse_args(argv)
    if not args.demo and (not args.graph or not args.ckpt_dir):
        p.error("--graph and --ckpt-dir are required unless --demo")

    runtime = _build_repl_runtime(args)
    session = Session(id="repl", config=runtime.config)
    print(f"kgchat REPL | topics: {len(runtime.graph.topics)} | algo: {runtime.config.recall_algo} "
          f"| kb: {runtime.config.top_n_knowledge} | /trace for details, empty line to quit")
    while True:
        try:
            text = input("you> ").strip()
        except (EOFError, KeyboardInterrupt):
            break
        if not text:
            break
        if text == "/trace":
            if session.traces:
                print(json.dumps(session.traces[-1].as_dict(), ensure_ascii=False, indent=1))
            else:
                print("(no turns yet)")
            continue
        try:
            reply, trace = runtime.chat_turn(session, text)
        except Exception as exc:  # keep the REPL alive on stage errors
            print(f"error: {exc}")
            continue
        print(f"bot> {reply}")
        print(f"     [topic: {trace.best_topic} | knowledge: "
              + "; ".join(f"{d['head']} {d['relation']} {d['tail']}" for d in trace.selected) + "]")
    return 0


def chat_server_main(argv=None) -> int:
    import uvicorn

    from .service import create_app

    p = argparse.ArgumentParser(prog="chat-server")
    p.add_argument("--graph")
    p.add_argument("--ckpt-dir")
    p.add_argument("--algo", choices=["tfidf", "lexical", "ac"])
    p.add_argument("--kb", type=int, choices=[1, 3])
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--demo", action="store_true")
    p.add_argument("--ui-dir", help="static directory to serve at / (the built chat UI)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    args = p.parse_args(argv)
    if not args.demo and (not args.graph or not args.ckpt_dir):
        p.error("--graph and --ckpt-dir are required unless --demo")

    runtime = _build_repl_runtime(args)
    app = create_app(runtime, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def make_toy_data_main(argv=None) -> int:
    from .synthetic import write_toy_world
    from .textprep import write_jsonl

    p = argparse.ArgumentParser(prog="make-toy-data")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dialogues", type=int, default=200)
    p.add_argument("--emit-datasets", action="store_true",
                   help="also write the three training sets as JSON-lines")
    args = p.parse_args(argv)
    paths = write_toy_world(args.out, seed=args.seed, n_dialogues=args.dialogues)
    if args.emit_datasets:
        graph, train, _ = _load_data_dir(args.out)
        tokenizer = _fit_tokenizer(graph, train)
        out = Path(args.out)
        tokenizer.save(out / "tokenizer.json")
        jobs = {
            "d_topic.jsonl": build_topic_samples(train, graph, tokenizer).samples,
            "d_kg.jsonl": build_matching_samples(train, graph, tokenizer, seed=args.seed).samples,
            "d_cg.jsonl": build_generation_samples(train, graph, tokenizer, seed=args.seed).samples,
        }
        for name, samples in jobs.items():
            write_jsonl(out / name, samples)
            paths[name] = out / name
    for k, v in paths.items():
        print(f"{k}: {v}")
    return 0
