"""Asynchronous majority dynamics.

One uniformly random node per step adopts the majority announcement among
its neighbors, breaking ties in favor of its private signal.  Unannounced
neighbors count for neither side; an all-unannounced neighborhood is a tie.

Two proof-auxiliary variants are supported: a set of nodes hard-coded to
announce 0 from the start ("against S"), and a single node that announces 1
from its first scheduled step onward.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _engine, rng as rngmod
from .errors import InvalidParameterError, TruncationError

BOT = -1  # "no announcement yet"

_CHUNK = 1 << 16


@dataclass(frozen=True)
class SignalAssignment:
    """Private signals: bits[v] is 1 with probability 1/2 + delta when sampled."""

    bits: np.ndarray
    delta: float

    @classmethod
    def sample(cls, n, delta, seed, trial=0):
        if not (0 < delta < 0.5):
            raise InvalidParameterError("delta must lie in (0, 1/2)")
        gen = rngmod.stream(seed, rngmod.SIGNALS, trial)
        bits = (gen.random(n) < 0.5 + delta).astype(np.int8)
        return cls(bits=bits, delta=delta)

    @classmethod
    def explicit(cls, bits, delta=0.25):
        return cls(bits=np.asarray(bits, dtype=np.int8), delta=delta)

    def flipped(self, v):
        bits = self.bits.copy()
        bits[v] = 1 - bits[v]
        return SignalAssignment(bits=bits, delta=self.delta)


@dataclass(frozen=True)
class Schedule:
    """Node activation order: either seeded-uniform or an explicit sequence."""

    seed: Optional[int] = None
    trial: int = 0
    explicit: Optional[np.ndarray] = None

    @classmethod
    def seeded(cls, seed, trial=0):
        return cls(seed=seed, trial=trial)

    @classmethod
    def from_sequence(cls, nodes):
        return cls(explicit=np.asarray(nodes, dtype=np.int64))

    @property
    def mode(self):
        return "explicit" if self.explicit is not None else "seeded"

    def chunks(self, n, chunk=_CHUNK):
        """Yield schedule arrays; the seeded stream is endless."""
        if self.explicit is not None:
            yield self.explicit
            return
        gen = rngmod.stream(self.seed, rngmod.SCHEDULE, self.trial)
        while True:
            yield gen.integers(0, n, size=chunk, dtype=np.int64)

    def describe(self):
        if self.explicit is not None:
            return {"mode": "explicit", "sequence": [int(x) for x in self.explicit]}
        return {"mode": "seeded", "seed": int(self.seed), "trial": int(self.trial)}


@dataclass(frozen=True)
class StopCondition:
    max_steps: int
    halt_at_stabilization: bool = True
    require_stabilization: bool = False


@dataclass
class DynamicsState:
    """Announcement snapshot plus the forcing overlays in effect."""

    announcements: np.ndarray  # -1 / 0 / 1
    t: int
    forced_incorrect: frozenset = frozenset()
    forced_correct: Optional[int] = None

    @property
    def announced_once(self):
        return self.announcements != BOT


@dataclass
class Events:
    """Per-step event log; step t of events[i] is i+1."""

    node: np.ndarray
    prev: np.ndarray
    next: np.ndarray

    def __len__(self):
        return len(self.node)

    @property
    def step(self):
        return np.arange(1, len(self.node) + 1, dtype=np.int64)

    def __iter__(self):
        for i in range(len(self.node)):
            yield (i + 1, int(self.node[i]), int(self.prev[i]), int(self.next[i]))


@dataclass
class RunTrace:
    graph: object
    signals: SignalAssignment
    schedule: Schedule
    events: Events
    final_state: DynamicsState
    stabilization_step: Optional[int]
    truncated: bool
    snapshot: Optional[np.ndarray] = None  # state at the requested step, if any

    @property
    def stabilized(self):
        return self.stabilization_step is not None


def default_step_cap(g):
    """8x the w.h.p. stopping bound 8*max(2 ln n, D+1)*n; hitting it is anomalous."""
    from .graphs import diameter

    n = g.n
    if g._diameter is None:
        g._diameter = diameter(g)
    return int(math.ceil(64 * max(2 * math.log(n) if n > 1 else 0.0, g._diameter + 1) * n))


def majority_update(g, state, signals, v):
    """The update rule as a pure function; v must not be a forced node."""
    if v in state.forced_incorrect or v == state.forced_correct:
        raise InvalidParameterError("majority_update is undefined for forced nodes")
    n1 = n0 = 0
    for u in g.adj[v]:
        a = state.announcements[u]
        if a == 1:
            n1 += 1
        elif a == 0:
            n0 += 1
    if n1 > n0:
        return 1
    if n1 < n0:
        return 0
    return int(signals.bits[v])


def step(g, state, signals, v):
    """Apply one scheduled step in place; returns the (t, node, prev, next) event."""
    prev = int(state.announcements[v])
    if v in state.forced_incorrect:
        new = 0
    elif v == state.forced_correct:
        new = 1
    else:
        new = majority_update(g, state, signals, v)
    state.announcements[v] = new
    state.t += 1
    return (state.t, v, prev, new)


def initial_state(g, forced_incorrect=(), forced_correct=None):
    ann = np.full(g.n, BOT, dtype=np.int8)
    for v in forced_incorrect:
        ann[v] = 0
    return DynamicsState(
        announcements=ann,
        t=0,
        forced_incorrect=frozenset(forced_incorrect),
        forced_correct=forced_correct,
    )


def run(
    g,
    signals,
    schedule,
    stop=None,
    *,
    forced_incorrect=(),
    forced_correct=None,
    record_events=True,
    snapshot_at=None,
):
    """Execute the process and return the full :class:`RunTrace`.

    Deterministic given (graph, signals, schedule).  With
    ``stop.halt_at_stabilization`` the run ends at the first step after which
    every node has announced and no update would change any announcement.
    """
    n = g.n
    if len(signals.bits) != n:
        raise InvalidParameterError("signals sized for a different graph")
    if stop is None:
        stop = StopCondition(max_steps=default_step_cap(g))
    indptr, indices = g.csr()
    forced_inc = np.zeros(n, dtype=np.int8)
    for v in forced_incorrect:
        forced_inc[v] = 1
    fcor = -1 if forced_correct is None else int(forced_correct)
    if fcor >= 0 and forced_inc[fcor]:
        raise InvalidParameterError("a node cannot be forced both ways")

    ann = np.empty(n, dtype=np.int8)
    n1 = np.empty(n, dtype=np.int64)
    n0 = np.empty(n, dtype=np.int64)
    content = np.zeros(n, dtype=np.bool_)
    meta = np.zeros(3, dtype=np.int64)
    sig = signals.bits.astype(np.int8)
    _engine.init_state(indptr, indices, sig, forced_inc, fcor, ann, n1, n0, content, meta)

    snap_at = -1 if snapshot_at is None else int(snapshot_at)
    snapshot = np.full(n, BOT, dtype=np.int8) if snap_at >= 0 else np.empty(0, dtype=np.int8)

    node_parts, prev_parts, next_parts = [], [], []
    chunk = min(_CHUNK, max(256, stop.max_steps))
    for sched in schedule.chunks(n, chunk):
        prev_out = np.empty(len(sched), dtype=np.int8)
        next_out = np.empty(len(sched), dtype=np.int8)
        used = _engine.advance(
            indptr, indices, sig, forced_inc, fcor,
            ann, n1, n0, content, meta,
            sched, prev_out, next_out,
            stop.max_steps, stop.halt_at_stabilization, snap_at, snapshot,
        )
        if record_events and used:
            node_parts.append(sched[:used].copy())
            prev_parts.append(prev_out[:used])
            next_parts.append(next_out[:used])
        if meta[_engine.T] >= stop.max_steps:
            break
        if stop.halt_at_stabilization and meta[_engine.NUM_BAD] == 0:
            break
        if used < len(sched):  # explicit schedule exhausted
            break

    stabilized = meta[_engine.NUM_BAD] == 0
    t = int(meta[_engine.T])
    final = DynamicsState(
        announcements=ann,
        t=t,
        forced_incorrect=frozenset(forced_incorrect),
        forced_correct=forced_correct,
    )
    if snap_at >= 0 and stabilized and t < snap_at:
        snapshot = ann.copy()  # state is constant after stabilization
    events = Events(
        node=np.concatenate(node_parts) if node_parts else np.empty(0, dtype=np.int64),
        prev=np.concatenate(prev_parts) if prev_parts else np.empty(0, dtype=np.int8),
        next=np.concatenate(next_parts) if next_parts else np.empty(0, dtype=np.int8),
    )
    truncated = not stabilized and t >= stop.max_steps
    trace = RunTrace(
        graph=g,
        signals=signals,
        schedule=schedule,
        events=events,
        final_state=final,
        stabilization_step=int(meta[_engine.LAST_CHANGE]) if stabilized else None,
        truncated=truncated,
        snapshot=snapshot if snap_at >= 0 else None,
    )
    if stop.require_stabilization and not stabilized:
        raise TruncationError(
            f"step cap {stop.max_steps} exhausted before stabilization", trace=trace
        )
    return trace


def run_reference(g, signals, schedule_nodes, forced_incorrect=(), forced_correct=None):
    """Pure-Python reference executor over an explicit schedule.

    Independent of the compiled kernel; used as an oracle in tests.
    """
    state = initial_state(g, forced_incorrect, forced_correct)
    events = [step(g, state, signals, int(v)) for v in schedule_nodes]
    return state, events


def is_fixed_point(g, state, signals):
    """True when every node has announced and no update would change anything."""
    if not state.announced_once.all():
        return False
    for v in range(g.n):
        if v in state.forced_incorrect:
            if state.announcements[v] != 0:
                return False
        elif v == state.forced_correct:
            if state.announcements[v] != 1:
                return False
        elif majority_update(g, state, signals, v) != state.announcements[v]:
            return False
    return True


def announcement_fractions(state):
    """(correct, incorrect, undecided) fractions of nodes."""
    ann = state.announcements
    n = len(ann)
    c = int((ann == 1).sum())
    i = int((ann == 0).sum())
    return c / n, i / n, (n - c - i) / n


def correct_fraction(state):
    """Fraction of nodes announcing 1 (unannounced nodes count as not correct)."""
    return announcement_fractions(state)[0]
