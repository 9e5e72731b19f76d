"""Shared oracle helpers.

Everything here is written independently of the library's own conversion
and counting paths, so tests compare against separately derived values:
element-loop dense mirrors and a literal evaluation of the operation-count
triple sum.
"""

import numpy as np


def dense_mirror(matrix):
    """Unpack to a full symmetric dense array by explicit element loops."""
    n, k, ld = matrix.dim, matrix.bandwidth, matrix.lead_dim
    out = np.zeros((n, n))
    for j in range(n):
        for i in range(j, min(n - 1, j + k) + 1):
            v = matrix.data[j * ld + (i - j)]
            out[i, j] = v
            out[j, i] = v
    return out


def lower_band_rows(dense, k):
    """Rows of the lower band of a dense array: row d holds diagonal d."""
    n = dense.shape[0]
    rows = np.zeros((k + 1, n))
    for d in range(k + 1):
        for j in range(n - d):
            rows[d, j] = dense[j + d, j]
    return rows


def flops_triple_loop(n, k):
    """Literal evaluation of the count's triple sum, bound l <= j as printed."""
    total = 0
    for i in range(n):
        r = max(0, i - k)
        for j in range(r, i + 1):
            total += 2 * (j - r + 1)  # accumulate statements, 2 ops each
            total += 2                # finalize statement
    return total


def kahn_topo_order(task_count, edges):
    """Independent topological sort; returns None when a cycle survives."""
    indeg = [0] * task_count
    succs = [[] for _ in range(task_count)]
    for a, b in edges:
        indeg[b] += 1
        succs[a].append(b)
    ready = [i for i in range(task_count) if indeg[i] == 0]
    order = []
    while ready:
        node = ready.pop()
        order.append(node)
        for nxt in succs[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    return order if len(order) == task_count else None
