"""Numba core of the asynchronous update loop.

State is kept in flat arrays; the driver in :mod:`majoritylab.dynamics` owns
allocation and schedule generation, the kernel only advances the process.
Announcements are encoded -1 (none yet), 0, 1.

Stabilization is tracked incrementally: per-node counts of neighbors
announcing 1/0 plus a "content" flag (the node's next update would not change
its announcement).  ``num_bad`` counts nodes that are unannounced or
discontent, so the fixed-point test is O(1) per step and exact.
"""

import numpy as np
from numba import njit

# meta indices
T = 0
NUM_BAD = 1
LAST_CHANGE = 2


@njit(cache=True, nogil=True)
def node_content(v, ann, n1, n0, signals, forced_inc, forced_cor):
    a = ann[v]
    if a == -1:
        return False
    if forced_inc[v] == 1:
        return True
    if v == forced_cor:
        return a == 1
    if n1[v] > n0[v]:
        want = 1
    elif n1[v] < n0[v]:
        want = 0
    else:
        want = signals[v]
    return a == want


@njit(cache=True, nogil=True)
def init_state(indptr, indices, signals, forced_inc, forced_cor, ann, n1, n0, content, meta):
    n = ann.shape[0]
    for v in range(n):
        ann[v] = 0 if forced_inc[v] == 1 else -1
        n1[v] = 0
        n0[v] = 0
    for v in range(n):
        if forced_inc[v] == 1:
            for k in range(indptr[v], indptr[v + 1]):
                n0[indices[k]] += 1
    bad = 0
    for v in range(n):
        content[v] = node_content(v, ann, n1, n0, signals, forced_inc, forced_cor)
        if not content[v]:
            bad += 1
    meta[T] = 0
    meta[NUM_BAD] = bad
    meta[LAST_CHANGE] = 0


@njit(cache=True, nogil=True)
def advance(
    indptr,
    indices,
    signals,
    forced_inc,
    forced_cor,
    ann,
    n1,
    n0,
    content,
    meta,
    sched,
    prev_out,
    next_out,
    max_steps,
    halt_at_stab,
    snapshot_at,
    snapshot_out,
):
    """Consume schedule entries; returns the number of entries used."""
    used = 0
    t = meta[T]
    bad = meta[NUM_BAD]
    for k in range(sched.shape[0]):
        if t >= max_steps:
            break
        if halt_at_stab and bad == 0:
            break
        v = sched[k]
        t += 1
        used += 1
        prev = ann[v]
        if forced_inc[v] == 1:
            new = 0
        elif v == forced_cor:
            new = 1
        elif n1[v] > n0[v]:
            new = 1
        elif n1[v] < n0[v]:
            new = 0
        else:
            new = signals[v]
        prev_out[k] = prev
        next_out[k] = new
        if new != prev:
            ann[v] = new
            if content[v]:
                bad += 1
                content[v] = False
            if node_content(v, ann, n1, n0, signals, forced_inc, forced_cor):
                content[v] = True
                bad -= 1
            for j in range(indptr[v], indptr[v + 1]):
                u = indices[j]
                if prev == 1:
                    n1[u] -= 1
                elif prev == 0:
                    n0[u] -= 1
                if new == 1:
                    n1[u] += 1
                else:
                    n0[u] += 1
                was = content[u]
                now = node_content(u, ann, n1, n0, signals, forced_inc, forced_cor)
                if was and not now:
                    content[u] = False
                    bad += 1
                elif now and not was:
                    content[u] = True
                    bad -= 1
            meta[LAST_CHANGE] = t
        if snapshot_at == t:
            for i in range(ann.shape[0]):
                snapshot_out[i] = ann[i]
    meta[T] = t
    meta[NUM_BAD] = bad
    return used
