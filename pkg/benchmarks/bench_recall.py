"""Latency benchmark for the recall scan kernels: compiled vs pure Python.

Builds a dictionary at full production scale (12k+ topics, the size the
pipeline faces on a real corpus), then times the automaton scan and the
longest-match scan over a realistic 10-utterance history window with both
kernels. The per-turn budget for rough recall is 10 ms.

    python3 benchmarks/bench_recall.py [--topics 12149] [--iters 300]
"""

from __future__ import annotations

import argparse
import random
import statistics
import time

from kgchat.recall import _scan_py
from kgchat.recall.automaton import build_automaton

try:
    from kgchat.recall import _scan as _scan_cy
except ImportError:
    _scan_cy = None

ADJECTIVES = [
    "Golden", "Iron", "Silent", "Crimson", "Velvet", "Vivid", "Amber", "Frozen",
    "Hollow", "Paper", "Lunar", "Quiet", "Scarlet", "Marble", "Ashen", "Neon",
    "Gilded", "Broken", "Distant", "Winter", "Savage", "Gentle", "Electric",
]
NOUNS = [
    "Harbor", "Meadow", "Comet", "Orchard", "Horizon", "Empire", "Outpost",
    "Lantern", "Summit", "Tempest", "Bazaar", "Forge", "Monsoon", "Tide",
    "Voyage", "Prairie", "Garden", "Station", "Canyon", "Archive", "Parade",
]


def make_dictionary(n: int, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    names = set()
    while len(names) < n:
        name = f"{rng.choice(ADJECTIVES)} {rng.choice(NOUNS)}"
        if rng.random() < 0.7:
            name += f" {rng.randint(2, 9999)}"
        names.add(name)
    return sorted(names)


def make_history(dictionary: list[str], seed: int = 1) -> str:
    rng = random.Random(seed)
    fillers = "what is the genre of ; who directed ; tell me more about ; I liked ; rating of".split(";")
    parts = []
    for _ in range(10):
        parts.append(rng.choice(fillers).strip() + " " + rng.choice(dictionary) + " ?")
    return " ".join(parts)


def _args_ac(auto, text):
    return (auto.symtab, auto.state_ptr, auto.edge_sym, auto.edge_next,
            auto.fail, auto.out_ptr, auto.out_pat, text)


def _args_longest(auto, text):
    return (auto.symtab, auto.state_ptr, auto.edge_sym, auto.edge_next,
            auto.end_pat, auto.pat_len, text)


def bench(fn, args, iters: int) -> list[float]:
    fn(*args)  # warm up
    times = []
    for _ in range(iters):
        t0 = time.perf_counter()
        fn(*args)
        times.append((time.perf_counter() - t0) * 1e3)
    return times


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--topics", type=int, default=12149)
    parser.add_argument("--iters", type=int, default=300)
    args = parser.parse_args()

    dictionary = make_dictionary(args.topics)
    history = make_history(dictionary)
    print(f"dictionary: {len(dictionary)} topics | history: {len(history)} chars")

    t0 = time.perf_counter()
    auto = build_automaton(dictionary)
    print(f"automaton: {auto.n_states} states, built in {time.perf_counter() - t0:.2f}s")

    kernels = [("python", _scan_py)]
    if _scan_cy is not None:
        kernels.append(("cython", _scan_cy))
    else:
        print("compiled kernel not built; benchmarking the fallback only")

    results = {}
    for name, mod in kernels:
        for scan_name, fn, argfn in (
            ("ac_scan", mod.ac_scan, _args_ac),
            ("longest_scan", mod.longest_scan, _args_longest),
        ):
            times = bench(fn, argfn(auto, history), args.iters)
            med = statistics.median(times)
            results[(name, scan_name)] = med
            print(f"{name:7s} {scan_name:13s} median {med:8.3f} ms  (p90 {sorted(times)[int(0.9 * len(times))]:.3f} ms)")

    if _scan_cy is not None:
        for scan_name in ("ac_scan", "longest_scan"):
            speedup = results[("python", scan_name)] / results[("cython", scan_name)]
            print(f"speedup {scan_name}: {speedup:.1f}x")
        # both kernels must agree exactly
        assert _scan_cy.ac_scan(*_args_ac(auto, history)) == _scan_py.ac_scan(*_args_ac(auto, history))
        assert _scan_cy.longest_scan(*_args_longest(auto, history)) == _scan_py.longest_scan(*_args_longest(auto, history))
        print("kernel agreement: ok")

    fastest = min(results[(k, "ac_scan")] for k, _ in kernels) + min(results[(k, "longest_scan")] for k, _ in kernels)
    budget = "within" if fastest < 10.0 else "OVER"
    print(f"per-turn scan cost (best kernels, both scans): {fastest:.3f} ms -- {budget} the 10 ms budget")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
