"""Structural analysis of realized runs.

Everything here is a pure function of an immutable trace: critical-time
tables, the audit that every announcement switch is explained by a critical
chain, influence sets, safety, cut certificates, and finalization structure.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import BOT
from .errors import IncompleteInputError, InvalidParameterError
from .graphs import path, root_at, subtree_stats

UNDEFINED = -1


class TraceIndex:
    """Per-node announcement history with O(log) point lookups."""

    def __init__(self, trace):
        self.trace = trace
        n = trace.graph.n
        node = trace.events.node
        steps = [[] for _ in range(n)]
        values = [[] for _ in range(n)]
        nxt = trace.events.next
        for i in range(len(node)):
            v = int(node[i])
            steps[v].append(i + 1)
            values[v].append(int(nxt[i]))
        self.steps = [np.asarray(s, dtype=np.int64) for s in steps]
        self.values = [np.asarray(s, dtype=np.int8) for s in values]
        self.forced_incorrect = trace.final_state.forced_incorrect

    def value_at(self, v, t):
        """C^t(v), with forced-incorrect nodes announcing 0 from t = 0."""
        if v in self.forced_incorrect:
            return 0
        idx = np.searchsorted(self.steps[v], t, side="right") - 1
        if idx < 0:
            return BOT
        return int(self.values[v][idx])

    def first_announce(self, v):
        if len(self.steps[v]) == 0:
            return UNDEFINED
        return int(self.steps[v][0])

    def first_announce_after(self, v, t):
        """First step > t at which v announces, or UNDEFINED."""
        idx = np.searchsorted(self.steps[v], t, side="right")
        if idx >= len(self.steps[v]):
            return UNDEFINED
        return int(self.steps[v][idx])


@dataclass
class CriticalTable:
    source: int
    times: np.ndarray  # times[v] = T(source, v); UNDEFINED where unresolved


@dataclass
class ChainVerdict:
    ok: bool
    violation: Optional[tuple] = None  # offending (t, node, prev, next)

    def __bool__(self):
        return self.ok


@dataclass
class FinalizationReport:
    rooting: object
    finalized_at: np.ndarray
    nearly_finalized_at: np.ndarray  # UNDEFINED at the root
    t_v: np.ndarray                  # max critical time from any descendant (incl. self)
    partial: bool


def critical_times(trace, u, index=None):
    """T(u, v) for every v, read off the event log along tree paths."""
    index = index or TraceIndex(trace)
    g = trace.graph
    rooting = root_at(g, u)
    times = np.full(g.n, UNDEFINED, dtype=np.int64)
    times[u] = index.first_announce(u)
    for v in rooting.order[1:]:
        p = int(rooting.parent[v])
        if times[p] == UNDEFINED:
            continue
        times[v] = index.first_announce_after(int(v), int(times[p]))
    return CriticalTable(source=u, times=times)


def all_critical_tables(trace, index=None):
    index = index or TraceIndex(trace)
    return [critical_times(trace, u, index) for u in range(trace.graph.n)]


def influence_set(trace, v, t, tables=None):
    """Nodes u with T(u, v) <= t: the signals C^t(v) may depend on."""
    tables = tables or all_critical_tables(trace)
    out = set()
    for u in range(trace.graph.n):
        tu = tables[u].times[v]
        if tu != UNDEFINED and tu <= t:
            out.add(u)
    return out


def verify_critical_chain(trace, tables=None, index=None):
    """Check every announcement switch against the critical-chain mechanism.

    A switch of v at t must have a source u with t = T(u,v), u's first
    announcement equal to the new value, and every node on the u-v path
    having itself switched to that value at its own critical time.
    """
    index = index or TraceIndex(trace)
    tables = tables or all_critical_tables(trace, index)
    g = trace.graph
    node, prev, nxt = trace.events.node, trace.events.prev, trace.events.next
    for i in range(len(node)):
        p, x = int(prev[i]), int(nxt[i])
        if p == x:
            continue
        v = int(node[i])
        t = i + 1
        if p == BOT:
            # first announcement: v itself is the source
            if index.first_announce(v) != t:
                return ChainVerdict(ok=False, violation=(t, v, p, x))
            continue
        if not _find_chain_source(trace, index, tables, v, t, p, x):
            return ChainVerdict(ok=False, violation=(t, v, p, x))
    return ChainVerdict(ok=True)


def _find_chain_source(trace, index, tables, v, t, old, new):
    g = trace.graph
    for u in range(g.n):
        if tables[u].times[v] != t:
            continue
        tu = tables[u].times[u]
        if tu == UNDEFINED or index.value_at(u, int(tu)) != new:
            continue
        ok = True
        for x in path(g, u, v).vertices[1:]:
            tx = int(tables[u].times[x])
            if (
                tx == UNDEFINED
                or index.value_at(x, tx) != new
                or index.value_at(x, tx - 1) != old
            ):
                ok = False
                break
        if ok:
            return True
    return False


def is_safe_thru(trace, v, T, index=None):
    """True iff C^t(v) is in {unannounced, 1} for every t <= T."""
    if trace.final_state.t < T and not trace.stabilized:
        raise InvalidParameterError("trace neither covers step T nor stabilized")
    if v in trace.final_state.forced_incorrect:
        return False
    index = index or TraceIndex(trace)
    for i, s in enumerate(index.steps[v]):
        if s > T:
            break
        if index.values[v][i] == 0:
            return False
    return True


def cuts(g, against_runs, x, u, v, T):
    """Does x cut u from v thru T?

    ``against_runs`` maps candidate nodes y on P(u,x) to their against-S_y
    runs, where S_y holds y's neighbors on P(u,v); all runs share the base
    schedule so safety is comparable across S choices.
    """
    full_path = path(g, u, v).vertices
    if x not in full_path:
        raise InvalidParameterError("x must lie on the u-v path")
    for y in path(g, u, x).vertices:
        if y not in against_runs:
            raise IncompleteInputError(f"missing against-S run for node {y}")
        run_y = against_runs[y]
        expected_s = _path_neighbors(full_path, y)
        if frozenset(expected_s) != run_y.final_state.forced_incorrect:
            raise IncompleteInputError(
                f"against-S run for node {y} forces {sorted(run_y.final_state.forced_incorrect)}, "
                f"expected {sorted(expected_s)}"
            )
        if is_safe_thru(run_y, y, T):
            return True
    return False


def _path_neighbors(path_vertices, y):
    i = path_vertices.index(y)
    out = []
    if i > 0:
        out.append(path_vertices[i - 1])
    if i + 1 < len(path_vertices):
        out.append(path_vertices[i + 1])
    return out


def compute_t_v(trace, rooting, tables=None):
    """T_v = max critical time T(x, v) over descendants x of v (self included)."""
    tables = tables or all_critical_tables(trace)
    g = trace.graph
    desc_lists = _descendants(rooting, g.n)
    t_v = np.full(g.n, UNDEFINED, dtype=np.int64)
    for v in range(g.n):
        best = UNDEFINED
        for x in desc_lists[v]:
            tx = int(tables[x].times[v])
            if tx == UNDEFINED:
                best = UNDEFINED
                break
            best = max(best, tx)
        t_v[v] = best
    return t_v


def _descendants(rooting, n):
    desc = [[v] for v in range(n)]
    for v in rooting.order[::-1]:
        for c in rooting.children[v]:
            desc[v].extend(desc[c])
    return desc


def finalization_report(trace, rooting, index=None, tables=None):
    """Finalization and near-finalization times for every node.

    ``finalized_at`` is the last step at which the node's announcement
    changed (decidable because the stabilized final state is a fixed point);
    ``nearly_finalized_at`` is the earliest step from which every later
    announcement of the node copies its parent when the parent has announced
    and repeats itself otherwise, until finalization.
    """
    index = index or TraceIndex(trace)
    tables = tables or all_critical_tables(trace, index)
    g = trace.graph
    partial = not trace.stabilized
    node, prev, nxt = trace.events.node, trace.events.prev, trace.events.next
    finalized_at = np.zeros(g.n, dtype=np.int64)
    for i in range(len(node)):
        if prev[i] != nxt[i]:
            finalized_at[int(node[i])] = i + 1
    nearly = np.full(g.n, UNDEFINED, dtype=np.int64)
    for v in range(g.n):
        p = int(rooting.parent[v])
        if p < 0:
            continue
        last_bad = 0
        for i, s in enumerate(index.steps[v]):
            s = int(s)
            if s >= finalized_at[v]:
                break
            new = int(index.values[v][i])
            pval = index.value_at(p, s)
            if pval == BOT:
                old = int(trace.events.prev[s - 1])
                qualifies = new == old
            else:
                qualifies = new == pval
            if not qualifies:
                last_bad = s
        nearly[v] = last_bad
    t_v = compute_t_v(trace, rooting, tables)
    return FinalizationReport(
        rooting=rooting,
        finalized_at=finalized_at,
        nearly_finalized_at=nearly,
        t_v=t_v,
        partial=partial,
    )


@dataclass
class CountingVerdict:
    ok: bool
    violation: Optional[tuple] = None
    half_children_step: Optional[int] = None  # v first has floor((deg-1)/2) finalized children

    def __bool__(self):
        return self.ok


def counting_check(trace, rooting, v, report=None, index=None):
    """Audit the finalization cascade below a finalized node.

    Once v is finalized at t >= T_v, any descendant announcing after its
    parent's finalization (and after its own T) must finalize on that
    announcement.  Also reports when v first had floor((deg(v)-1)/2)
    finalized children.
    """
    index = index or TraceIndex(trace)
    if report is None:
        report = finalization_report(trace, rooting, index)
    g = trace.graph
    fin = report.finalized_at
    need = (g.degree(v) - 1) // 2
    child_fins = sorted(int(fin[c]) for c in rooting.children[v])
    half_step = 0 if need == 0 else (child_fins[need - 1] if need <= len(child_fins) else None)

    if fin[v] < report.t_v[v]:
        return CountingVerdict(ok=True, half_children_step=half_step)
    stack = [(int(c), max(int(fin[v]), int(report.t_v[c]))) for c in rooting.children[v]]
    while stack:
        d, threshold = stack.pop()
        s = index.first_announce_after(d, threshold)
        if s != UNDEFINED and fin[d] > s:
            return CountingVerdict(ok=False, violation=(d, s, int(fin[d])), half_children_step=half_step)
        for c in rooting.children[d]:
            stack.append((int(c), max(int(fin[d]), int(report.t_v[c]))))
    return CountingVerdict(ok=True, half_children_step=half_step)


def flip_finalization_check(trace, rooting, report=None, index=None):
    """Audit: a child changing after its parent's T forces the parent final.

    For every change event of c at step t > T_v where v = parent(c), the
    parent must never change again (finalized_at[v] <= t).  Returns the list
    of violating (t, child, parent) triples.
    """
    index = index or TraceIndex(trace)
    if report is None:
        report = finalization_report(trace, rooting, index)
    node, prev, nxt = trace.events.node, trace.events.prev, trace.events.next
    fin = report.finalized_at
    t_v = report.t_v
    violations = []
    for i in range(len(node)):
        p, x = int(prev[i]), int(nxt[i])
        if p == x or p == BOT:
            continue
        c = int(node[i])
        v = int(rooting.parent[c])
        if v < 0:
            continue
        t = i + 1
        if t_v[v] != UNDEFINED and t > t_v[v] and fin[v] > t:
            violations.append((t, c, v))
    return violations


def state_at(trace, t, index=None):
    """Announcement vector at step t (array of -1/0/1)."""
    index = index or TraceIndex(trace)
    g = trace.graph
    return np.array([index.value_at(v, t) for v in range(g.n)], dtype=np.int8)


@dataclass
class PairCorrelation:
    pair: tuple
    covariance: float
    std_error: float


def pair_correlation(traces, pairs, T):
    """Sample covariance of correctness indicators at step T across trials."""
    if len(traces) < 1000:
        raise InvalidParameterError("need at least 1000 trials for covariance estimates")
    states = np.stack([state_at(tr, T) for tr in traces])
    out = []
    for (u, v) in pairs:
        a = (states[:, u] == 1).astype(float)
        b = (states[:, v] == 1).astype(float)
        prod = (a - a.mean()) * (b - b.mean())
        cov = prod.mean()
        se = prod.std(ddof=1) / np.sqrt(len(prod))
        out.append(PairCorrelation(pair=(u, v), covariance=float(cov), std_error=float(se)))
    return out
