import io
import json
import os

import numpy as np
import pytest

from majoritylab import cli, graphs, traceio
from majoritylab.dynamics import Schedule, SignalAssignment, run
from majoritylab.errors import ParseError


def _trace(seed=4):
    g = graphs.gen_preferential_attachment(40, seed=seed)
    signals = SignalAssignment.sample(g.n, 0.3, seed=seed)
    return g, run(g, signals, Schedule.seeded(seed))


def test_jsonl_round_trip():
    g, trace = _trace()
    buf = io.StringIO()
    traceio.write_trace_jsonl(trace, buf)
    buf.seek(0)
    back = traceio.read_trace_jsonl(buf, graph=g)
    assert [tuple(e) for e in back.events] == [tuple(e) for e in trace.events]
    assert list(back.final_state.announcements) == list(trace.final_state.announcements)
    assert back.stabilization_step == trace.stabilization_step
    assert back.signals.delta == trace.signals.delta
    assert list(back.signals.bits) == list(trace.signals.bits)


def test_jsonl_header_is_self_describing():
    _, trace = _trace()
    buf = io.StringIO()
    traceio.write_trace_jsonl(trace, buf)
    header = json.loads(buf.getvalue().splitlines()[0])
    for key in ("format", "version", "graph_hash", "delta", "schedule", "steps"):
        assert key in header


def test_jsonl_rejects_wrong_graph():
    g, trace = _trace()
    other = graphs.gen_baseline("line", g.n)
    buf = io.StringIO()
    traceio.write_trace_jsonl(trace, buf)
    buf.seek(0)
    with pytest.raises(ParseError):
        traceio.read_trace_jsonl(buf, graph=other)


def test_jsonl_parse_error_offset():
    g, trace = _trace()
    buf = io.StringIO()
    traceio.write_trace_jsonl(trace, buf)
    lines = buf.getvalue().splitlines(keepends=True)
    corrupted = lines[0] + lines[1] + "garbage\n"
    with pytest.raises(ParseError) as exc:
        traceio.read_trace_jsonl(io.StringIO(corrupted))
    assert exc.value.offset == len((lines[0] + lines[1]).encode())


def test_npz_round_trip(tmp_path):
    g, trace = _trace()
    path = tmp_path / "t.npz"
    traceio.write_trace_npz(trace, path)
    back = traceio.read_trace_npz(path, graph=g)
    assert [tuple(e) for e in back.events] == [tuple(e) for e in trace.events]


def test_not_a_trace_file():
    with pytest.raises(ParseError):
        traceio.read_trace_jsonl(io.StringIO("hello world\n"))


# ---------------------------------------------------------------------------
# CLI


def test_cli_usage_error():
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["analyze", "--trace", "/nonexistent"]) == 2


def test_cli_gen_deterministic(tmp_path):
    a = tmp_path / "a.edges"
    b = tmp_path / "b.edges"
    assert cli.main(["gen", "--family", "pa", "--n", "300", "--seed", "7", "--out", str(a)]) == 0
    assert cli.main(["gen", "--family", "pa", "--n", "300", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_run_analyze_pipeline(tmp_path, capsys):
    gpath = tmp_path / "g.edges"
    tpath = tmp_path / "t.jsonl"
    assert cli.main(["gen", "--family", "rrt", "--n", "60", "--seed", "5", "--out", str(gpath)]) == 0
    assert (
        cli.main(
            ["run", "--graph", str(gpath), "--delta", "0.3", "--seed", "9", "--out", str(tpath)]
        )
        == 0
    )
    assert (
        cli.main(
            [
                "analyze", "--trace", str(tpath), "--graph", str(gpath),
                "--check", "critical-chain", "--check", "finalization",
            ]
        )
        == 0
    )
    out = capsys.readouterr().out
    assert "critical-chain: ok" in out
    assert "# config" in out  # resolved configuration echoed


def test_cli_oracle_frozen_constant(capsys):
    assert cli.main(["oracle", "--family", "line", "--n", "3", "--delta", "0.3"]) == 0
    out = capsys.readouterr().out
    assert "p_correct_majority = 0.832" in out


def test_cli_experiment_writes_outputs(tmp_path, monkeypatch):
    monkeypatch.setenv("MAJORITYLAB_OUT", str(tmp_path))
    code = cli.main(
        [
            "experiment", "--family", "line", "--n", "30", "--delta", "0.3",
            "--trials", "10", "--seed", "2", "--name", "mini",
        ]
    )
    assert code == 0
    assert (tmp_path / "mini.csv").exists()
    assert (tmp_path / "mini.json").exists()


def test_cli_help_lists_documented_flags(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["experiment", "--help"])
    out = capsys.readouterr().out
    for flag in ("--family", "--n", "--delta", "--seed", "--trials", "--max-steps", "--config"):
        assert flag in out
