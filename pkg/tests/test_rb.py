import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from gatherbft import wire
from gatherbft.adversary import RandomGatherAdversary
from gatherbft.checkers import check_rb
from gatherbft.rb import (ECHO, INIT, READY, RbError, RbInstance, RbLayer, RbMachine,
                          accept_threshold, parse_rb, rb_message, ready_threshold)
from gatherbft.sim import Fuzzed, Simulation, all_correct_decided


def phases(sends):
    return [parse_rb(wire.decode(p))[2] for _, p in sends]


def test_broadcast_sends_init_to_everyone():
    inst = RbInstance(4, 1, 0, 0, "t")
    sends = inst.broadcast("v")
    assert sorted(r for r, _ in sends) == [0, 1, 2, 3]
    assert set(phases(sends)) == {INIT}


def test_broadcast_errors():
    with pytest.raises(RbError):
        RbInstance(4, 1, 1, 0).broadcast("v")
    inst = RbInstance(4, 1, 0, 0)
    inst.broadcast("v")
    with pytest.raises(RbError):
        inst.broadcast("v")


@pytest.mark.parametrize("n,f", [(4, 1), (5, 1), (7, 2), (10, 3), (13, 4), (6, 1)])
def test_ready_threshold_is_smallest_integer_above_half(n, f):
    half = Fraction(n + f, 2)
    want = math.floor(half) + 1
    assert ready_threshold(n, f) == want
    assert ready_threshold(n, f) > half >= ready_threshold(n, f) - 1
    assert accept_threshold(f) == 2 * f + 1


def test_three_echoes_trigger_ready_at_n4():
    inst = RbInstance(4, 1, 1, 0)
    inst.on_message(0, INIT, "v")
    out = []
    for peer in (0, 1, 2):
        sends, acc = inst.on_message(peer, ECHO, "v")
        out.append(phases(sends))
        assert not acc
    assert READY in out[2] and READY not in out[0] + out[1]


def test_three_readys_accept_at_n4():
    inst = RbInstance(4, 1, 1, 0)
    results = [inst.on_message(p, READY, "v")[1] for p in (0, 2, 3)]
    assert results == [False, False, True]
    assert inst.accepted_value == "v"


def test_f_plus_one_readys_send_ready_without_accepting():
    inst = RbInstance(4, 1, 2, 0)
    s1, a1 = inst.on_message(0, READY, "v")
    s2, a2 = inst.on_message(1, READY, "v")
    assert not s1 and not a1
    assert set(phases(s2)) == {READY} and not a2


def test_echo_amplification_flag():
    on = RbInstance(4, 1, 3, 0, amplify=True)
    off = RbInstance(4, 1, 3, 0, amplify=False)
    for inst in (on, off):
        inst.on_message(1, ECHO, "v")
    assert ECHO in phases(on.on_message(2, ECHO, "v")[0])
    assert ECHO not in phases(off.on_message(2, ECHO, "v")[0])


def test_duplicates_and_foreign_init_ignored():
    inst = RbInstance(4, 1, 1, 0)
    assert inst.on_message(2, INIT, "v") == ([], False)
    inst.on_message(2, READY, "v")
    inst.on_message(2, READY, "v")
    assert inst.ready_counts[wire.value_key("v")] == 1


def test_layer_ignores_other_tags_and_garbage():
    layer = RbLayer(4, 1, 0, "A")
    assert layer.handle(1, wire.decode(rb_message(1, "B", INIT, 1))) is None
    assert layer.handle(1, ["RB", "junk"]) is None
    assert layer.handle(1, None) is None
    sends, acc = layer.handle(1, wire.decode(rb_message(1, "A", INIT, 1)))
    assert len(sends) == 4 and acc == []


def _run(n, seed, sender_faulty):
    f = (n - 1) // 3
    faulty = list(range(n - f, n))
    sender = faulty[0] if sender_faulty else 0
    sim = Simulation(n, f, faulty, {sender: "v"},
                     lambda p: RbMachine(n, f, p, sender, "v" if p == sender else None),
                     adversary=RandomGatherAdversary(seed, values=("v", "w", "x"), tag="rb"),
                     schedule=Fuzzed(seed))
    return sim.run_until(all_correct_decided), sender


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**40), n=st.sampled_from([4, 7, 10]), sender_faulty=st.booleans())
def test_agreement_validity_totality(seed, n, sender_faulty):
    t, sender = _run(n, seed, sender_faulty)
    for c in check_rb(t, sender, "v"):
        assert c.ok, c.line()
    if not sender_faulty:
        assert len(t.correct_decisions()) == len(t.correct)
