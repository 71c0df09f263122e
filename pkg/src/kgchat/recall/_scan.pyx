# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled scan kernels for the recall hot path.

Behavioral twin of ``_scan_py``; see that module for the contract. The scans
run once per dialogue turn over the full topic dictionary (12k+ patterns at
KdConv scale), which is the latency-critical inner loop of the pipeline.
"""


cdef inline int _edge(const int[:] state_ptr, const int[:] edge_sym,
                      const int[:] edge_next, int state, int sym) noexcept:
    cdef int lo = state_ptr[state]
    cdef int hi = state_ptr[state + 1]
    cdef int mid, v
    while lo < hi:
        mid = (lo + hi) // 2
        v = edge_sym[mid]
        if v == sym:
            return edge_next[mid]
        if v < sym:
            lo = mid + 1
        else:
            hi = mid
    return -1


def ac_scan(const int[:] symtab, const int[:] state_ptr, const int[:] edge_sym,
            const int[:] edge_next, const int[:] fail, const int[:] out_ptr,
            const int[:] out_pat, str text):
    """All pattern occurrences in ``text`` as (end_index, pattern_id) pairs."""
    cdef int max_cp = symtab.shape[0] - 1
    cdef int state = 0
    cdef int i, cp, sym, nxt, k
    cdef int n = len(text)
    cdef list hits = []
    for i in range(n):
        cp = <int> ord(text[i])
        sym = symtab[cp] if cp <= max_cp else -1
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
            state = fail[state]
        for k in range(out_ptr[state], out_ptr[state + 1]):
            hits.append((i, out_pat[k]))
    return hits


def longest_scan(const int[:] symtab, const int[:] state_ptr, const int[:] edge_sym,
                 const int[:] edge_next, const int[:] end_pat, const int[:] pat_len,
                 str text):
    """Greedy longest-match segmentation: (start_index, pattern_id) pairs."""
    cdef int max_cp = symtab.shape[0] - 1
    cdef int n = len(text)
    cdef int i = 0
    cdef int j, cp, sym, state, best, best_len, pid
    cdef list hits = []
    while i < n:
        state = 0
        best = -1
        best_len = 0
        j = i
        while j < n:
            cp = <int> ord(text[j])
            sym = symtab[cp] if cp <= max_cp else -1
            if sym < 0:
                break
            state = _edge(state_ptr, edge_sym, edge_next, state, sym)
            if state < 0:
                break
            j += 1
            pid = end_pat[state]
            if pid >= 0:
                best = pid
                best_len = j - i
        if best >= 0:
            hits.append((i, best))
            i += best_len
        else:
            i += 1
    return hits
