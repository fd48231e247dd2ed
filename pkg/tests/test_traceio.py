import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from gatherbft import campaign, traceio
from gatherbft.campaign import TrialConfig


def trial(protocol="cc", n=4, seed=5, **kw):
    return campaign.run_trial(TrialConfig(protocol, n, (n - 1) // 3, seed, **kw)).trace


def test_value_encoding_round_trip():
    for v in (None, 0, "a", [1, "b"], (1, 2), {2: "x", 0: None}, Fraction(3, 8), ("v", Fraction(1, 2))):
        assert traceio.decode_value(json.loads(json.dumps(traceio.encode_value(v)))) == v


def test_records_round_trip():
    t = trial(R=4)
    back = traceio.loads(traceio.dumps([t]))
    assert len(back) == 1
    assert traceio.same_trace(t, back[0])
    assert back[0].meta == t.meta and back[0].stop_reason == t.stop_reason
    assert {p: d.value for p, d in back[0].decisions.items()} == {p: d.value for p, d in t.decisions.items()}


def test_several_traces_in_one_file(tmp_path):
    a, b = trial(seed=1), trial("gather", 5, seed=2)
    path = tmp_path / "two.jsonl"
    traceio.write_traces(path, [a, b])
    got = traceio.read_traces(path)
    assert [traceio.same_trace(x, y) for x, y in zip([a, b], got)] == [True, True]


def _lines():
    return traceio.dumps([trial("rb", seed=3)]).splitlines()


@pytest.mark.parametrize("mangle,where", [
    (lambda ls: ls[:5] + ["{not json"] + ls[6:], 6),
    (lambda ls: ls[:3] + [json.dumps({"type": "mystery"})] + ls[4:], 4),
    (lambda ls: ls[:2] + [json.dumps({k: v for k, v in json.loads(ls[2]).items() if k != "sender"})] + ls[3:], 3),
], ids=["bad-json", "unknown-type", "missing-field"])
def test_parse_errors_name_the_line(mangle, where):
    with pytest.raises(traceio.TraceParseError) as exc:
        traceio.loads("\n".join(mangle(_lines())))
    assert str(exc.value).startswith(f"line {where}:")
    assert exc.value.lineno == where


def test_decreasing_times_rejected():
    ls = _lines()
    evs = [i for i, x in enumerate(ls) if '"type":"event"' in x]
    last = json.loads(ls[evs[-1]])
    last["time"] = "-1/1"
    ls[evs[-1]] = json.dumps(last)
    with pytest.raises(traceio.TraceParseError, match=f"line {evs[-1] + 1}"):
        traceio.loads("\n".join(ls))


def test_records_before_header_rejected():
    ls = _lines()
    with pytest.raises(traceio.TraceParseError):
        traceio.loads("\n".join(ls[1:]))
    with pytest.raises(traceio.TraceParseError, match="no trace header"):
        traceio.loads("")


def test_truncated_trace_loads_and_fails_checks():
    ls = [x for x in _lines() if '"type":"decision"' not in x]
    (t,) = traceio.loads("\n".join(ls))
    bad = [c for c in campaign.assess_trial(t) if not c.ok]
    assert bad and any("never accepted" in c.detail or "did not accept" in c.detail for c in bad)


@settings(max_examples=15, deadline=None)
@given(protocol=st.sampled_from(campaign.PROTOCOLS), seed=st.integers(0, 2**32))
def test_replay_is_bit_identical(protocol, seed):
    n = 5 if protocol == "crusader-rb" else 4
    kw = {"R": 2} if protocol == "cc" else {}
    t = trial(protocol, n, seed, **kw)
    (stored,) = traceio.loads(traceio.dumps([t]))
    again = campaign.replay(stored)
    assert traceio.same_trace(t, again)
    assert traceio.dumps([again]) == traceio.dumps([t])
