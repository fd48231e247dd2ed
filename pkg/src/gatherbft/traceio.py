"""Line-delimited trace export and import.

One JSON object per line.  A trace starts with a ``header`` record and is
followed by ``send``, ``event``, ``decision`` and ``anomaly`` records; a file
may hold several traces back to back.  Payloads are hex, times are
``"num/den"``.

The same records double as a schedule script: :func:`replay_directives` turns
a trace into the directive list that reproduces it, injecting the faulty
processes' messages at the recorded positions.
"""

from __future__ import annotations

import json
from fractions import Fraction

from . import wire
from .sim import (DELIVER, WAKEUP, Decision, Deliver, Emit, Envelope, Event, ExecutionTrace,
                  WakeUp)


class TraceParseError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


# decisions are dicts (gather), tuples (cc) or plain JSON values


def encode_value(v):
    if isinstance(v, dict):
        return {"pairs": [[k, encode_value(v[k])] for k in sorted(v)]}
    if isinstance(v, tuple):
        return {"tuple": [encode_value(x) for x in v]}
    if isinstance(v, Fraction):
        return {"frac": wire.fmt_time(v)}
    return {"v": v}


def decode_value(obj):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"bad value encoding {obj!r}")
    (tag, body), = obj.items()
    if tag == "pairs":
        return {int(k): decode_value(v) for k, v in body}
    if tag == "tuple":
        return tuple(decode_value(x) for x in body)
    if tag == "frac":
        return wire.parse_time(body)
    if tag == "v":
        return body
    raise ValueError(f"unknown value tag {tag!r}")


def trace_records(trace: ExecutionTrace) -> list[dict]:
    recs = [{
        "type": "header",
        "label": trace.label,
        "n": trace.n,
        "f": trace.f,
        "faulty": sorted(trace.faulty),
        "inputs": [[p, encode_value(trace.inputs.get(p))] for p in range(trace.n)],
        "stop_reason": trace.stop_reason,
        "meta": trace.meta,
    }]
    for e in trace.message_log:
        recs.append({
            "type": "send", "sender": e.sender, "recipient": e.recipient, "seq": e.link_seq,
            "time": wire.fmt_time(e.send_time), "payload": e.payload.hex(),
            "after": e.emitted_after,
        })
    for ev in trace.events:
        rec = {"type": "event", "kind": ev.kind, "target": ev.target, "time": wire.fmt_time(ev.time)}
        if ev.kind == DELIVER:
            rec.update(sender=ev.sender, seq=ev.link_seq, payload=ev.payload.hex(), discarded=ev.discarded)
        recs.append(rec)
    for p in sorted(trace.decisions):
        d = trace.decisions[p]
        recs.append({"type": "decision", "pid": p, "value": encode_value(d.value),
                     "time": wire.fmt_time(d.time), "index": d.event_index})
    for a in trace.anomalies:
        recs.append({"type": "anomaly", "text": a})
    return recs


def dumps(traces) -> str:
    if isinstance(traces, ExecutionTrace):
        traces = [traces]
    lines = []
    for t in traces:
        lines += [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in trace_records(t)]
    return "\n".join(lines) + "\n"


def write_traces(path, traces) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(traces))


def _need(rec, key, lineno, kind=None):
    if key not in rec:
        raise TraceParseError(lineno, f"missing field {key!r}")
    v = rec[key]
    if kind is int and (not isinstance(v, int) or isinstance(v, bool)):
        raise TraceParseError(lineno, f"field {key!r} must be an integer")
    if kind is str and not isinstance(v, str):
        raise TraceParseError(lineno, f"field {key!r} must be a string")
    return v


def loads(text: str) -> list[ExecutionTrace]:
    traces = []
    cur = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except ValueError as exc:
            raise TraceParseError(lineno, f"not JSON ({exc.msg})") from None
        if not isinstance(rec, dict) or "type" not in rec:
            raise TraceParseError(lineno, "record without a type")
        try:
            kind = rec["type"]
            if kind == "header":
                n = _need(rec, "n", lineno, int)
                f = _need(rec, "f", lineno, int)
                inputs = {p: decode_value(v) for p, v in _need(rec, "inputs", lineno)}
                cur = ExecutionTrace(n=n, f=f, faulty=frozenset(_need(rec, "faulty", lineno)),
                                     inputs=inputs, label=rec.get("label", ""),
                                     stop_reason=rec.get("stop_reason"), meta=rec.get("meta") or {})
                traces.append(cur)
                continue
            if cur is None:
                raise TraceParseError(lineno, "record before any header")
            if kind == "send":
                cur.message_log.append(Envelope(
                    _need(rec, "sender", lineno, int), _need(rec, "recipient", lineno, int),
                    bytes.fromhex(_need(rec, "payload", lineno, str)), _need(rec, "seq", lineno, int),
                    wire.parse_time(_need(rec, "time", lineno, str)), rec.get("after")))
            elif kind == "event":
                ek = _need(rec, "kind", lineno)
                t = wire.parse_time(_need(rec, "time", lineno, str))
                if cur.events and t < cur.events[-1].time:
                    raise TraceParseError(lineno, "event times decrease")
                if ek == WAKEUP:
                    cur.events.append(Event(WAKEUP, _need(rec, "target", lineno, int), t))
                elif ek == DELIVER:
                    cur.events.append(Event(
                        DELIVER, _need(rec, "target", lineno, int), t,
                        _need(rec, "sender", lineno, int), _need(rec, "seq", lineno, int),
                        bytes.fromhex(_need(rec, "payload", lineno, str)), bool(rec.get("discarded", False))))
                else:
                    raise TraceParseError(lineno, f"unknown event kind {ek!r}")
            elif kind == "decision":
                cur.decisions[_need(rec, "pid", lineno, int)] = Decision(
                    decode_value(_need(rec, "value", lineno)),
                    wire.parse_time(_need(rec, "time", lineno, str)),
                    _need(rec, "index", lineno, int))
            elif kind == "anomaly":
                cur.anomalies.append(_need(rec, "text", lineno, str))
            else:
                raise TraceParseError(lineno, f"unknown record type {kind!r}")
        except TraceParseError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise TraceParseError(lineno, str(exc)) from None
    if not traces:
        raise TraceParseError(0, "no trace header found")
    return traces


def read_traces(path) -> list[ExecutionTrace]:
    with open(path, encoding="ascii", errors="replace") as fh:
        return loads(fh.read())


def replay_directives(trace: ExecutionTrace) -> list:
    """Directives that reproduce ``trace`` when run with no adversary."""
    emits: dict[int, list] = {}
    for e in trace.message_log:
        if e.sender in trace.faulty:
            emits.setdefault(e.emitted_after or 0, []).append(e)
    out = []
    for i, ev in enumerate(trace.events):
        for e in emits.pop(i, []):
            out.append(Emit(e.sender, e.recipient, e.payload, e.send_time))
        if ev.kind == WAKEUP:
            out.append(WakeUp(ev.target, ev.time))
        else:
            out.append(Deliver(ev.sender, ev.target, ev.link_seq, ev.time))
    for i in sorted(emits):
        for e in emits[i]:
            out.append(Emit(e.sender, e.recipient, e.payload, e.send_time))
    return out


def same_trace(a: ExecutionTrace, b: ExecutionTrace) -> bool:
    """Bit-level equality of the exported forms (labels ignored)."""
    ra, rb = trace_records(a), trace_records(b)
    ha, hb = dict(ra[0]), dict(rb[0])
    for h in (ha, hb):
        h.pop("label", None)
        h.pop("meta", None)
        h.pop("stop_reason", None)
    return ha == hb and ra[1:] == rb[1:]
