"""Multi-pattern matching automaton shared by the recall algorithms.

The trie/goto/fail/output construction runs in Python once per index build;
the per-call scans run through a compiled Cython kernel when available and an
identical pure-Python kernel otherwise (see ``kgchat.recall`` for selection).
Both kernels operate on the same flattened arrays:

* ``symtab``    code point -> dense symbol id (-1 for chars in no pattern)
* ``state_ptr/edge_sym/edge_next``  CSR adjacency, edges sorted by symbol
* ``fail``      Aho-Corasick failure links
* ``out_ptr/out_pat``  closure output sets (patterns ending at each state)
* ``end_pat``   pattern ending exactly at a state (-1 if none), for the
                greedy longest-match trie walk
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Automaton:
    patterns: tuple[str, ...]
    symtab: np.ndarray
    state_ptr: np.ndarray
    edge_sym: np.ndarray
    edge_next: np.ndarray
    fail: np.ndarray
    out_ptr: np.ndarray
    out_pat: np.ndarray
    end_pat: np.ndarray
    pat_len: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.fail)


def build_automaton(patterns: list[str]) -> Automaton:
    """Build the goto/fail/output structure for a set of distinct patterns."""
    patterns = list(dict.fromkeys(patterns))  # dedupe, order-preserving
    if not patterns:
        raise ValueError("automaton needs at least one pattern")
    if any(not p for p in patterns):
        raise ValueError("patterns must be non-empty strings")

    alphabet = sorted({ch for p in patterns for ch in p})
    sym_of = {ch: i for i, ch in enumerate(alphabet)}
    max_cp = max(ord(ch) for ch in alphabet)
    symtab = np.full(max_cp + 1, -1, dtype=np.int32)
    for ch, s in sym_of.items():
        symtab[ord(ch)] = s

    # goto trie
    children: list[dict[int, int]] = [{}]
    end_pat_l: list[int] = [-1]
    for pid, pat in enumerate(patterns):
        state = 0
        for ch in pat:
            sym = sym_of[ch]
            nxt = children[state].get(sym)
            if nxt is None:
                nxt = len(children)
                children.append({})
                end_pat_l.append(-1)
                children[state][sym] = nxt
            state = nxt
        end_pat_l[state] = pid

    # failure links + closure outputs, BFS order
    n = len(children)
    fail = np.zeros(n, dtype=np.int32)
    outputs: list[list[int]] = [[] for _ in range(n)]
    for s, pid in enumerate(end_pat_l):
        if pid >= 0:
            outputs[s].append(pid)
    queue = list(children[0].values())
    for s in queue:
        fail[s] = 0
    head = 0
    while head < len(queue):
        s = queue[head]
        head += 1
        for sym, t in children[s].items():
            queue.append(t)
            f = fail[s]
            while f and sym not in children[f]:
                f = fail[f]
            fail[t] = children[f].get(sym, 0) if children[f].get(sym, 0) != t else 0
            outputs[t] = outputs[t] + outputs[fail[t]]

    # flatten edges (sorted by symbol for binary search) and outputs
    state_ptr = np.zeros(n + 1, dtype=np.int32)
    edge_sym: list[int] = []
    edge_next: list[int] = []
    for s in range(n):
        for sym in sorted(children[s]):
            edge_sym.append(sym)
            edge_next.append(children[s][sym])
        state_ptr[s + 1] = len(edge_sym)
    out_ptr = np.zeros(n + 1, dtype=np.int32)
    out_pat: list[int] = []
    for s in range(n):
        out_pat.extend(outputs[s])
        out_ptr[s + 1] = len(out_pat)

    return Automaton(
        patterns=tuple(patterns),
        symtab=symtab,
        state_ptr=state_ptr,
        edge_sym=np.asarray(edge_sym, dtype=np.int32),
        edge_next=np.asarray(edge_next, dtype=np.int32),
        fail=fail,
        out_ptr=out_ptr,
        out_pat=np.asarray(out_pat, dtype=np.int32),
        end_pat=np.asarray(end_pat_l, dtype=np.int32),
        pat_len=np.asarray([len(p) for p in patterns], dtype=np.int32),
    )
