"""Pure-Python scan kernels; behavioral twin of the Cython module ``_scan``.

Used automatically when the compiled extension is unavailable (or when
``KGCHAT_PURE_PYTHON=1``). Semantics must match ``_scan.pyx`` exactly; the
test suite runs the oracle equivalence checks against whichever kernel is
selected, and the benchmark runs both.
"""

from __future__ import annotations


def _edge(state_ptr, edge_sym, edge_next, state: int, sym: int) -> int:
    lo = int(state_ptr[state])
    hi = int(state_ptr[state + 1])
    while lo < hi:
        mid = (lo + hi) // 2
        v = int(edge_sym[mid])
        if v == sym:
            return int(edge_next[mid])
        if v < sym:
            lo = mid + 1
        else:
            hi = mid
    return -1


def ac_scan(symtab, state_ptr, edge_sym, edge_next, fail, out_ptr, out_pat, text: str):
    """All pattern occurrences in ``text`` as (end_index, pattern_id) pairs."""
    max_cp = len(symtab) - 1
    hits: list[tuple[int, int]] = []
    state = 0
    for i, ch in enumerate(text):
        cp = ord(ch)
        sym = int(symtab[cp]) if cp <= max_cp else -1
        if sym < 0:
            state = 0
            continue
        while True:
            nxt = _edge(state_ptr, edge_sym, edge_next, state, sym)
            if nxt >= 0:
                state = nxt
                break
            if state == 0:
                break
            state = int(fail[state])
        for k in range(int(out_ptr[state]), int(out_ptr[state + 1])):
            hits.append((i, int(out_pat[k])))
    return hits


def longest_scan(symtab, state_ptr, edge_sym, edge_next, end_pat, pat_len, text: str):
    """Greedy longest-match segmentation: (start_index, pattern_id) pairs."""
    max_cp = len(symtab) - 1
    n = len(text)
    hits: list[tuple[int, int]] = []
    i = 0
    while i < n:
        state = 0
        best = -1
        best_len = 0
        j = i
        while j < n:
            cp = ord(text[j])
            sym = int(symtab[cp]) if cp <= max_cp else -1
            if sym < 0:
                break
            state = _edge(state_ptr, edge_sym, edge_next, state, sym)
            if state < 0:
                break
            j += 1
            pid = int(end_pat[state])
            if pid >= 0:
                best = pid
                best_len = j - i
        if best >= 0:
            hits.append((i, best))
            i += best_len
        else:
            i += 1
    return hits
