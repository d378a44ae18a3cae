import numpy as np
import pytest

from majoritylab import analysis, graphs
from majoritylab.analysis import UNDEFINED, TraceIndex
from majoritylab.dynamics import BOT, Schedule, SignalAssignment, StopCondition, run
from majoritylab.errors import IncompleteInputError, InvalidParameterError


def _line3_trace():
    # halt_at_stabilization off so the post-fixed-point repeats are recorded
    g = graphs.gen_baseline("line", 3)
    signals = SignalAssignment.explicit([1, 1, 1], delta=0.3)
    return run(
        g,
        signals,
        Schedule.from_sequence([0, 2, 1, 0, 1, 2]),
        stop=StopCondition(max_steps=6, halt_at_stabilization=False),
    )


def test_critical_times_hand_example():
    trace = _line3_trace()
    t0 = analysis.critical_times(trace, 0)
    # source announces at step 1; node 1 first announces after that at step 3;
    # node 2's first announcement after step 3 is its step-6 repeat
    assert list(t0.times) == [1, 3, 6]
    t2 = analysis.critical_times(trace, 2)
    assert t2.times[2] == 2 and t2.times[1] == 3 and t2.times[0] == 4


def test_critical_times_undefined_when_chain_never_completes():
    g = graphs.gen_baseline("line", 3)
    signals = SignalAssignment.explicit([1, 1, 1], delta=0.3)
    trace = run(g, signals, Schedule.from_sequence([0, 1, 2]))
    table = analysis.critical_times(trace, 2)
    # node 2 announced last, so no later announcements propagate back
    assert table.times[2] == 3
    assert table.times[1] == UNDEFINED and table.times[0] == UNDEFINED


def test_trace_index_lookups():
    trace = _line3_trace()
    idx = TraceIndex(trace)
    assert idx.value_at(1, 2) == BOT
    assert idx.value_at(1, 3) == 1
    assert idx.first_announce(2) == 2
    assert idx.first_announce_after(2, 2) == 6


def test_influence_set_grows_with_time():
    trace = _line3_trace()
    tables = analysis.all_critical_tables(trace)
    assert analysis.influence_set(trace, 2, 2, tables) == {2}
    assert analysis.influence_set(trace, 2, 6, tables) == {0, 1, 2}


def test_verify_critical_chain_on_engine_traces():
    for seed in range(5):
        g = graphs.gen_preferential_attachment(40, seed=seed)
        signals = SignalAssignment.sample(g.n, 0.3, seed=seed)
        trace = run(g, signals, Schedule.seeded(seed))
        assert trace.stabilized
        assert analysis.verify_critical_chain(trace)


def test_verify_critical_chain_flags_forged_event():
    trace = _line3_trace()
    # forge an unexplained switch: node 0 flips to 0 with no chain behind it
    trace.events.node = np.append(trace.events.node, 0)
    trace.events.prev = np.append(trace.events.prev, 1)
    trace.events.next = np.append(trace.events.next, 0)
    verdict = analysis.verify_critical_chain(trace)
    assert not verdict.ok
    assert verdict.violation == (7, 0, 1, 0)


def test_is_safe_thru():
    trace = _line3_trace()
    assert analysis.is_safe_thru(trace, 0, 6)
    g = graphs.gen_baseline("line", 3)
    bad = run(
        g,
        SignalAssignment.explicit([0, 1, 1], delta=0.3),
        Schedule.from_sequence([0, 1, 2, 1, 0, 2, 0, 1, 2]),
    )
    assert not analysis.is_safe_thru(bad, 0, 6)


def test_is_safe_thru_needs_coverage():
    g = graphs.gen_baseline("line", 40)
    signals = SignalAssignment.sample(g.n, 0.3, seed=0)
    trace = run(g, signals, Schedule.seeded(0), stop=StopCondition(max_steps=5))
    with pytest.raises(InvalidParameterError):
        analysis.is_safe_thru(trace, 0, 10**9)


def test_forced_incorrect_never_safe():
    g = graphs.gen_baseline("star", 5)
    signals = SignalAssignment.sample(g.n, 0.3, seed=3)
    trace = run(g, signals, Schedule.seeded(3), forced_incorrect=(1,))
    assert not analysis.is_safe_thru(trace, 1, 1)


def test_cuts_requires_complete_against_runs():
    g = graphs.gen_baseline("line", 5)
    with pytest.raises(IncompleteInputError):
        analysis.cuts(g, {}, x=2, u=0, v=4, T=10)


def test_cuts_star_path():
    g = graphs.gen_baseline("line", 3)
    T = 60
    runs = {}
    for y in (0, 1):
        # S holds y's neighbors on the 0-2 path
        s = tuple(v for v in (y - 1, y + 1) if 0 <= v <= 2)
        signals = SignalAssignment.explicit([1, 1, 1], delta=0.3)
        runs[y] = run(
            g,
            signals,
            Schedule.seeded(17),
            stop=StopCondition(max_steps=T),
            forced_incorrect=s,
        )
    assert analysis.cuts(g, runs, x=1, u=0, v=2, T=T) in (True, False)


def test_t_v_includes_self_for_leaves():
    trace = _line3_trace()
    rooting = graphs.root_at(trace.graph, 0)
    t_v = analysis.compute_t_v(trace, rooting)
    idx = TraceIndex(trace)
    assert t_v[2] == idx.first_announce(2)


def test_finalization_report_nearly_before_t_v():
    for seed in range(10):
        g = graphs.gen_preferential_attachment(30, seed=seed)
        signals = SignalAssignment.sample(g.n, 0.3, seed=seed)
        trace = run(g, signals, Schedule.seeded(seed))
        rooting = graphs.root_at(g, 0)
        report = analysis.finalization_report(trace, rooting)
        assert not report.partial
        for v in range(g.n):
            nf, tv = report.nearly_finalized_at[v], report.t_v[v]
            if nf != UNDEFINED and tv != UNDEFINED:
                assert nf <= tv
        assert analysis.flip_finalization_check(trace, rooting, report) == []


def test_counting_check_on_stabilized_traces():
    for seed in range(5):
        g = graphs.gen_balanced_mary(2, 4)
        signals = SignalAssignment.sample(g.n, 0.3, seed=seed)
        trace = run(g, signals, Schedule.seeded(seed))
        rooting = graphs.root_at(g, 0)
        verdict = analysis.counting_check(trace, rooting, 0)
        assert verdict.ok


def test_state_at_matches_final():
    g = graphs.gen_preferential_attachment(25, seed=6)
    signals = SignalAssignment.sample(g.n, 0.3, seed=6)
    trace = run(g, signals, Schedule.seeded(6))
    assert list(analysis.state_at(trace, trace.final_state.t)) == list(
        trace.final_state.announcements
    )
    assert set(analysis.state_at(trace, 0)) == {BOT}


def test_pair_correlation_needs_trials():
    with pytest.raises(InvalidParameterError):
        analysis.pair_correlation([], [(0, 1)], 5)


def test_pair_correlation_adjacent_nodes_positive():
    g = graphs.gen_baseline("line", 6)
    traces = []
    for trial in range(1200):
        signals = SignalAssignment.sample(g.n, 0.3, seed=500, trial=trial)
        traces.append(run(g, signals, Schedule.seeded(500, trial), record_events=True))
    (res,) = analysis.pair_correlation(traces, [(2, 3)], T=10**9)
    # neighbors on a line coordinate: correctness indicators correlate positively
    assert res.covariance > 3 * res.std_error
