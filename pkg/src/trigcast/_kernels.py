"""Compiled worklist version of the reliable-set closure.

Same fixed point as :func:`trigcast.analysis.reliable_set_closure`, written
against CSR arrays so numba can compile it.  Runs as plain Python when numba
is missing.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _has_path(indptr, indices, blocked, in_s, p, q, hops, path, it):
    # simple path p -> w of <= hops edges, avoiding q and blocked nodes, w in S
    d = 0
    path[0] = p
    it[0] = indptr[p]
    while d >= 0:
        u = path[d]
        if it[d] < indptr[u + 1]:
            w = indices[it[d]]
            it[d] += 1
            if w == q or blocked[w]:
                continue
            seen = False
            for k in range(d + 1):
                if path[k] == w:
                    seen = True
                    break
            if seen:
                continue
            if in_s[w]:
                return True
            if d + 1 < hops:
                d += 1
                path[d] = w
                it[d] = indptr[w]
        else:
            d -= 1
    return False


@njit(cache=True)
def _push_ball(indptr, indices, blocked, in_s, queued, stack, top, v, hops, stamp, mark, bfs):
    # push every unsettled correct node within `hops` of v
    stamp += 1
    mark[v] = stamp
    bfs[0] = v
    head = 0
    tail = 1
    depth_end = 1
    depth = 0
    while head < tail and depth < hops:
        while head < depth_end:
            u = bfs[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                w = indices[k]
                if mark[w] == stamp:
                    continue
                mark[w] = stamp
                bfs[tail] = w
                tail += 1
                if not blocked[w] and not in_s[w] and not queued[w]:
                    queued[w] = 1
                    stack[top] = w
                    top += 1
        depth += 1
        depth_end = tail
    return top, stamp


@njit(cache=True)
def closure_mask(indptr, indices, blocked, seeds, hops, target):
    """Boolean membership array of the closure grown from ``seeds``.

    ``blocked`` marks nodes unusable on paths (Byzantine, or outside a
    window).  Stops early once ``target`` joins (pass -1 to disable).
    """
    n = indptr.shape[0] - 1
    in_s = np.zeros(n, dtype=np.uint8)
    queued = np.zeros(n, dtype=np.uint8)
    stack = np.empty(n + 1, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    bfs = np.empty(n + 1, dtype=np.int64)
    path = np.empty(hops + 1, dtype=np.int64)
    it = np.empty(hops + 1, dtype=np.int64)
    top = 0
    stamp = 0
    for s in seeds:
        in_s[s] = 1
    if target >= 0 and in_s[target]:
        return in_s
    for s in seeds:
        top, stamp = _push_ball(indptr, indices, blocked, in_s, queued, stack, top, s, hops, stamp, mark, bfs)
    while top > 0:
        top -= 1
        p = stack[top]
        queued[p] = 0
        if in_s[p] or blocked[p]:
            continue
        joined = False
        for k in range(indptr[p], indptr[p + 1]):
            q = indices[k]
            if in_s[q] and _has_path(indptr, indices, blocked, in_s, p, q, hops, path, it):
                joined = True
                break
        if joined:
            in_s[p] = 1
            if p == target:
                return in_s
            top, stamp = _push_ball(indptr, indices, blocked, in_s, queued, stack, top, p, hops, stamp, mark, bfs)
    return in_s
