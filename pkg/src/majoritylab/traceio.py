"""Trace serialization: JSON-lines and a compact npz binary format.

Every trace file starts with (or embeds) a self-describing header carrying
the graph hash, seeds, delta and format version, so a trace can be replayed
or analyzed without guessing where it came from.
"""

import json

import numpy as np

from .dynamics import (
    BOT,
    DynamicsState,
    Events,
    RunTrace,
    Schedule,
    SignalAssignment,
)
from .errors import ParseError

FORMAT = "majoritylab-trace"
VERSION = 1


def _header(trace):
    return {
        "format": FORMAT,
        "version": VERSION,
        "graph_hash": trace.graph.content_hash() if trace.graph is not None else None,
        "n": int(len(trace.signals.bits)),
        "delta": float(trace.signals.delta),
        "signals": [int(b) for b in trace.signals.bits],
        "schedule": trace.schedule.describe(),
        "forced_incorrect": sorted(int(v) for v in trace.final_state.forced_incorrect),
        "forced_correct": trace.final_state.forced_correct,
        "stabilization_step": trace.stabilization_step,
        "truncated": bool(trace.truncated),
        "steps": int(trace.final_state.t),
    }


def _enc(a):
    return None if a == BOT else int(a)


def _dec(a):
    return BOT if a is None else int(a)


def write_trace_jsonl(trace, fileobj):
    fileobj.write(json.dumps(_header(trace)) + "\n")
    for t, node, prev, nxt in trace.events:
        fileobj.write(
            json.dumps({"t": t, "node": node, "prev": _enc(prev), "next": _enc(nxt)})
            + "\n"
        )


def _schedule_from_desc(desc):
    if desc["mode"] == "explicit":
        return Schedule.from_sequence(desc["sequence"])
    return Schedule.seeded(desc["seed"], desc.get("trial", 0))


def _rebuild(header, node, prev, nxt, graph):
    n = header["n"]
    if graph is not None and graph.content_hash() != header["graph_hash"]:
        raise ParseError("trace was recorded on a different graph")
    signals = SignalAssignment.explicit(header["signals"], header["delta"])
    ann = np.full(n, BOT, dtype=np.int8)
    for v in header["forced_incorrect"]:
        ann[v] = 0
    for i in range(len(node)):
        ann[node[i]] = nxt[i]
    final = DynamicsState(
        announcements=ann,
        t=header["steps"],
        forced_incorrect=frozenset(header["forced_incorrect"]),
        forced_correct=header["forced_correct"],
    )
    return RunTrace(
        graph=graph,
        signals=signals,
        schedule=_schedule_from_desc(header["schedule"]),
        events=Events(node=node, prev=prev, next=nxt),
        final_state=final,
        stabilization_step=header["stabilization_step"],
        truncated=header["truncated"],
    )


def read_trace_jsonl(fileobj, graph=None):
    offset = 0
    first = fileobj.readline()
    try:
        header = json.loads(first)
        if header.get("format") != FORMAT:
            raise ValueError("not a trace header")
    except ValueError as exc:
        raise ParseError(f"bad trace header: {exc}", offset=0) from None
    offset += len(first.encode() if isinstance(first, str) else first)
    node, prev, nxt = [], [], []
    for line in fileobj:
        if not line.strip():
            offset += len(line.encode() if isinstance(line, str) else line)
            continue
        try:
            ev = json.loads(line)
            node.append(int(ev["node"]))
            prev.append(_dec(ev["prev"]))
            nxt.append(_dec(ev["next"]))
        except (ValueError, KeyError) as exc:
            raise ParseError(f"bad event line: {exc}", offset=offset) from None
        offset += len(line.encode() if isinstance(line, str) else line)
    return _rebuild(
        header,
        np.asarray(node, dtype=np.int64),
        np.asarray(prev, dtype=np.int8),
        np.asarray(nxt, dtype=np.int8),
        graph,
    )


def write_trace_npz(trace, path):
    np.savez_compressed(
        path,
        header=json.dumps(_header(trace)),
        node=trace.events.node,
        prev=trace.events.prev,
        next=trace.events.next,
    )


def read_trace_npz(path, graph=None):
    try:
        data = np.load(path, allow_pickle=False)
        header = json.loads(str(data["header"]))
        if header.get("format") != FORMAT:
            raise ValueError("not a trace archive")
    except (ValueError, KeyError, OSError) as exc:
        raise ParseError(f"bad trace archive: {exc}", offset=0) from None
    return _rebuild(header, data["node"], data["prev"], data["next"], graph)
