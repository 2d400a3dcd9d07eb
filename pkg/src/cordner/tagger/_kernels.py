"""Hot loops of the lexicon tagger.

Both kernels operate on plain numpy arrays so they compile under numba's
nopython mode; with numba disabled they run as ordinary Python.
"""
import numpy as np

from .._accel import njit


@njit
def trie_scan(codes, alnum, child_ptr, child_chars, child_nodes, node_key):
    """Find every trie key occurring in ``codes`` on token boundaries.

    The trie is stored CSR-style: the children of node ``n`` are
    ``child_chars[child_ptr[n]:child_ptr[n + 1]]`` (sorted) with targets in
    ``child_nodes``; ``node_key[n]`` is the key id ending at ``n`` or -1.
    A span may not start or end between two alphanumeric characters.

    Returns an (m, 3) int64 array of ``(start, end_exclusive, key)`` rows.
    """
    n = codes.shape[0]
    cap = 16
    out = np.empty((cap, 3), np.int64)
    m = 0
    for i in range(n):
        if i > 0 and alnum[i - 1] and alnum[i]:
            continue
        node = 0
        j = i
        while j < n:
            c = codes[j]
            lo = child_ptr[node]
            hi = child_ptr[node + 1]
            while lo < hi:
                mid = (lo + hi) // 2
                if child_chars[mid] < c:
                    lo = mid + 1
                else:
                    hi = mid
            if lo == child_ptr[node + 1] or child_chars[lo] != c:
                break
            node = child_nodes[lo]
            j += 1
            key = node_key[node]
            if key >= 0 and (j == n or not (alnum[j - 1] and alnum[j])):
                if m == cap:
                    grown = np.empty((cap * 2, 3), np.int64)
                    grown[:m] = out[:m]
                    out = grown
                    cap *= 2
                out[m, 0] = i
                out[m, 1] = j
                out[m, 2] = key
                m += 1
    return out[:m].copy()


@njit
def greedy_select(starts, ends, types, order, n_types, text_len):
    """Accept candidates in ``order``, rejecting any that overlaps an already
    accepted span of the same type. Spans are half-open.

    Returns a boolean keep-mask aligned with the input arrays.
    """
    occupied = np.zeros((n_types, text_len), np.bool_)
    keep = np.zeros(starts.shape[0], np.bool_)
    for k in range(order.shape[0]):
        idx = order[k]
        t = types[idx]
        s = starts[idx]
        e = ends[idx]
        free = True
        for p in range(s, e):
            if occupied[t, p]:
                free = False
                break
        if free:
            keep[idx] = True
            for p in range(s, e):
                occupied[t, p] = True
    return keep
