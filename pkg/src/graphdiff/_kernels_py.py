"""Pure-Python reference for the compiled kernels.

Same outputs as ``_kernels``; orbits are found by growing connected vertex
sets from each node (ESU enumeration), which visits every connected 4-set once.
"""

from __future__ import annotations

import numpy as np


def _neighbors(A):
    return [set(np.flatnonzero(row).tolist()) for row in A]


def triangles(A):
    n = A.shape[0]
    nb = _neighbors(A)
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in nb[i]:
            if j <= i:
                continue
            for k in nb[i] & nb[j]:
                if k > j:
                    out[i] += 1
                    out[j] += 1
                    out[k] += 1
    return out


def _classify(out, sub, nb):
    d = [len(nb[v] & set(sub)) for v in sub]
    m = sum(d) // 2
    dmax = max(d)
    for v, dv in zip(sub, d):
        if m == 3:
            if dmax == 3:
                out[v, 3 if dv == 3 else 2] += 1
            else:
                out[v, 0 if dv == 1 else 1] += 1
        elif m == 4:
            out[v, 4 if dmax == 2 else 4 + dv] += 1
        elif m == 5:
            out[v, 8 if dv == 2 else 9] += 1
        else:
            out[v, 10] += 1


def orbit4(A):
    n = A.shape[0]
    nb = _neighbors(A)
    out = np.zeros((n, 11), dtype=np.int64)

    def extend(sub, ext, root, closed):
        if len(sub) == 4:
            _classify(out, sub, nb)
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            fresh = {u for u in nb[w] if u > root and u not in closed}
            extend(sub + [w], ext | fresh, root, closed | nb[w] | {w})

    for v in range(n):
        extend([v], {u for u in nb[v] if u > v}, v, nb[v] | {v})
    return out
