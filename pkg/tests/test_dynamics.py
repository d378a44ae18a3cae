import numpy as np
import pytest

from majoritylab import graphs
from majoritylab.dynamics import (
    BOT,
    Schedule,
    SignalAssignment,
    StopCondition,
    default_step_cap,
    initial_state,
    is_fixed_point,
    majority_update,
    run,
    run_reference,
    step,
)
from majoritylab.errors import InvalidParameterError, TruncationError


def test_line3_worked_example():
    # all-correct signals, schedule 0,2,1: everyone announces 1 and stays
    g = graphs.gen_baseline("line", 3)
    signals = SignalAssignment.explicit([1, 1, 1], delta=0.3)
    trace = run(g, signals, Schedule.from_sequence([0, 2, 1, 0, 1, 2]))
    assert list(trace.events) == [
        (1, 0, BOT, 1),
        (2, 2, BOT, 1),
        (3, 1, BOT, 1),
    ]
    assert trace.stabilization_step == 3
    assert list(trace.final_state.announcements) == [1, 1, 1]
    assert not trace.truncated


def test_tie_breaks_to_signal():
    g = graphs.gen_baseline("line", 3)
    state = initial_state(g)
    # middle node, no announced neighbors: tie, falls back to its signal
    assert majority_update(g, state, SignalAssignment.explicit([0, 0, 0]), 1) == 0
    assert majority_update(g, state, SignalAssignment.explicit([1, 1, 1]), 1) == 1
    # one neighbor each way is also a tie
    state.announcements[0] = 1
    state.announcements[2] = 0
    assert majority_update(g, state, SignalAssignment.explicit([0, 0, 0]), 1) == 0


def test_unannounced_count_for_neither_side():
    g = graphs.gen_baseline("star", 5)
    state = initial_state(g)
    state.announcements[1] = 0
    # one 0 vs three unannounced: strict minority of announced, center says 0
    assert majority_update(g, state, SignalAssignment.explicit([1] * 5), 0) == 0


def test_engine_matches_reference():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(2, 12))
        g = graphs.gen_random_recursive(n, int(rng.integers(1 << 60)))
        bits = rng.integers(0, 2, size=n)
        signals = SignalAssignment.explicit(bits, delta=0.3)
        sched = [int(x) for x in rng.integers(0, n, size=8 * n)]
        trace = run(g, signals, Schedule.from_sequence(sched))
        state, events = run_reference(g, signals, sched[: trace.final_state.t])
        assert [tuple(e) for e in trace.events] == events
        assert list(state.announcements) == list(trace.final_state.announcements)


def test_stabilized_state_is_fixed_point():
    g = graphs.gen_preferential_attachment(80, seed=7)
    signals = SignalAssignment.sample(g.n, 0.3, seed=7)
    trace = run(g, signals, Schedule.seeded(7))
    assert trace.stabilized
    assert is_fixed_point(g, trace.final_state, signals)


def test_forced_incorrect_nodes_stay_zero():
    g = graphs.gen_baseline("star", 6)
    signals = SignalAssignment.explicit([1] * 6, delta=0.3)
    trace = run(g, signals, Schedule.seeded(3), forced_incorrect=(4, 5))
    ann = trace.final_state.announcements
    assert ann[4] == 0 and ann[5] == 0
    # forced announcements are visible from the start
    assert trace.final_state.forced_incorrect == frozenset({4, 5})
    for t, v, prev, nxt in trace.events:
        if v in (4, 5):
            assert prev == 0 and nxt == 0


def test_forced_correct_announces_one_when_scheduled():
    g = graphs.gen_baseline("line", 4)
    signals = SignalAssignment.explicit([0, 0, 0, 0], delta=0.3)
    trace = run(g, signals, Schedule.from_sequence([2, 0, 1, 3, 2]), forced_correct=2)
    for t, v, prev, nxt in trace.events:
        if v == 2:
            assert nxt == 1


def test_forced_both_ways_rejected():
    g = graphs.gen_baseline("line", 3)
    signals = SignalAssignment.explicit([1, 1, 1])
    with pytest.raises(InvalidParameterError):
        run(g, signals, Schedule.seeded(0), forced_incorrect=(1,), forced_correct=1)


def test_truncation_error_carries_partial_trace():
    g = graphs.gen_baseline("line", 50)
    signals = SignalAssignment.sample(g.n, 0.3, seed=1)
    stop = StopCondition(max_steps=10, require_stabilization=True)
    with pytest.raises(TruncationError) as exc:
        run(g, signals, Schedule.seeded(1), stop=stop)
    partial = exc.value.trace
    assert partial.truncated and partial.final_state.t == 10


def test_snapshot_matches_event_replay():
    g = graphs.gen_preferential_attachment(60, seed=2)
    signals = SignalAssignment.sample(g.n, 0.3, seed=2)
    trace = run(g, signals, Schedule.seeded(2), snapshot_at=40)
    replay = np.full(g.n, BOT, dtype=np.int8)
    for t, v, prev, nxt in trace.events:
        if t > 40:
            break
        replay[v] = nxt
    assert list(trace.snapshot) == list(replay)


def test_snapshot_after_stabilization_equals_final_state():
    g = graphs.gen_baseline("line", 3)
    signals = SignalAssignment.explicit([1, 1, 1], delta=0.3)
    trace = run(g, signals, Schedule.seeded(4), snapshot_at=10**6)
    assert trace.stabilized
    assert list(trace.snapshot) == list(trace.final_state.announcements)


def test_seeded_runs_reproducible():
    g = graphs.gen_preferential_attachment(100, seed=9)
    signals = SignalAssignment.sample(g.n, 0.3, seed=9)
    a = run(g, signals, Schedule.seeded(9, trial=0))
    b = run(g, signals, Schedule.seeded(9, trial=0))
    c = run(g, signals, Schedule.seeded(9, trial=1))
    assert [tuple(e) for e in a.events] == [tuple(e) for e in b.events]
    assert [tuple(e) for e in a.events] != [tuple(e) for e in c.events]


def test_signal_bias():
    signals = SignalAssignment.sample(200_000, 0.3, seed=42)
    frac = signals.bits.mean()
    assert abs(frac - 0.8) < 0.005
    with pytest.raises(InvalidParameterError):
        SignalAssignment.sample(10, 0.6, seed=0)


def test_default_step_cap_formula():
    import math

    g = graphs.gen_baseline("line", 100)
    expected = math.ceil(64 * max(2 * math.log(100), 100) * 100)
    assert default_step_cap(g) == expected


def test_mismatched_signal_length_rejected():
    g = graphs.gen_baseline("line", 4)
    with pytest.raises(InvalidParameterError):
        run(g, SignalAssignment.explicit([1, 1]), Schedule.seeded(0))
