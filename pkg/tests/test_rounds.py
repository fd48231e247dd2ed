import pytest
from hypothesis import given, settings, strategies as st

from gatherbft import wire
from gatherbft.checkers import check_convergence
from gatherbft.rounds import (OMEGAS, CanonicalRoundAlgorithm, CanonicalRoundMachine, ConvergenceSpec,
                              HistoryStore, check_violation, claims_hold, construct_triple, message,
                              mirroring_sound, parse_message, prefix, run_canonical, triple_from_traces)
from gatherbft.sim import Fuzzed, Timed, all_correct_decided, indistinguishable, unit_delay


def alg(name, S):
    return CanonicalRoundAlgorithm(OMEGAS[name], S, name)


def test_canonical_run_all_same_input_decides_round_one():
    sim, t = run_canonical(alg("majority", 1), 5, 1, {p: 0 for p in range(5)},
                           schedule=Timed(unit_delay), predicate=all_correct_decided)
    assert {p: d.value for p, d in t.decisions.items()} == {p: 0 for p in range(5)}
    assert {m.decided_round for m in sim.machines.values()} == {1}
    assert all(c.ok for c in check_convergence(t, ConvergenceSpec()))


def test_history_store_hash_conses():
    s = HistoryStore()
    a = s.initial(0, "x")
    assert s.initial(0, "x") == a
    b = s.extend(a, 1, 1, s.initial(1, "y"))
    assert s.root(b) == (0, "x")
    assert s.received(b) == ((1, 1, s.initial(1, "y")),)


def test_message_parsing():
    assert parse_message(wire.decode(message(2, "ab"))) == (2, "ab")
    for junk in (["CR", 0, "ab"], ["CR", True, "ab"], ["CR", 1, 5], ["XX", 1, "ab"], None):
        assert parse_message(junk) is None


def _machine(closed):
    store = HistoryStore()
    m = CanonicalRoundMachine(4, 1, 0, 0, alg("majority", None), store, closed)
    m.wakeup()
    return m, store


def test_future_round_message_counts_in_open_mode():
    m, store = _machine(False)
    d = store.initial(1, 0)
    m.receive(1, message(2, d))
    assert m.count[2] == 1 and m.round == 1


def test_closed_mode_buffers_future_and_discards_late():
    m, store = _machine(True)
    d = {q: store.initial(q, 0) for q in range(4)}
    m.receive(1, message(2, d[1]))
    assert m.count[2] == 0 and m.buffered[2] == [(1, d[1])]
    for q in (0, 2, 3):
        m.receive(q, message(1, d[q]))
    assert m.round == 2 and m.count[2] == 1
    m.receive(1, message(1, d[1]))
    assert m.last_discarded
    assert m.count[1] == 3


def test_unknown_digest_ignored():
    m, _ = _machine(False)
    assert m.receive(1, message(1, "0" * 64)) == []
    assert m.count[1] == 0


@pytest.mark.parametrize("K", [1, 2, 3])
def test_triple_claims_hold_at_every_prefix(K):
    tr = construct_triple(alg("majority", K), 1, K)
    for r in range(K + 1):
        assert claims_hold(tr, r) == (True, True)
    assert mirroring_sound(tr)
    a0, a1, a2 = tr.traces
    assert not indistinguishable(a1, a2, tr.group("B", "C"))
    assert not indistinguishable(a0, a2, tr.group("A", "D"))


def test_e_equivocates_in_alpha2():
    tr = construct_triple(alg("majority", 2), 2, 2)
    a2 = tr.traces[2]
    for p in tr.groups["E"]:
        to_bc = {e.payload for e in a2.message_log if e.sender == p and e.recipient in tr.group("B", "C")}
        to_ad = {e.payload for e in a2.message_log if e.sender == p and e.recipient in tr.group("A", "D")}
        assert to_bc and to_ad and not to_bc & to_ad


def test_closed_discards_d_in_alpha0_and_b_in_alpha1():
    tr = construct_triple(alg("echo-majority", 2), 1, 10, closed=True)
    a0, a1, _ = tr.traces
    assert {e.sender for e in a0.events if e.discarded} == set(tr.groups["D"])
    assert {e.sender for e in a1.events if e.discarded} == set(tr.groups["B"])
    assert claims_hold(tr) == (True, True)


@pytest.mark.parametrize("name,verdict", [
    ("majority", "agreement violated in α₂"),
    ("own-input", "agreement violated in α₂"),
    ("echo-majority", "agreement violated in α₂"),
    ("min-input", "validity violated in α₁ (algorithm invalid)"),
    ("constant", "validity violated in α₁ (algorithm invalid)"),
])
def test_verdicts(name, verdict):
    for K, closed in ((1, False), (3, False), (6, True)):
        v = check_violation(construct_triple(alg(name, min(K, 2) if closed else K), 1, K, closed))
        assert v.verdict == verdict and v.ok


def test_rebuilt_triple_gives_same_verdict():
    tr = construct_triple(alg("majority", 2), 1, 2)
    again = triple_from_traces([prefix(t, 2) for t in tr.traces], 2, False)
    assert check_violation(again).verdict == check_violation(tr).verdict


def test_tampering_is_caught():
    tr = construct_triple(alg("majority", 1), 1, 1)
    e = next(x for x in tr.traces[0].message_log if x.sender in tr.traces[0].faulty)
    e.payload = message(1, "f" * 64)
    assert not mirroring_sound(tr)
    assert check_violation(tr).verdict == "construction unsound"


def test_spec_validation_and_bad_args():
    with pytest.raises(ValueError):
        ConvergenceSpec(x0=1, x1=1)
    with pytest.raises(ValueError):
        ConvergenceSpec(d0="a", d1="a")
    with pytest.raises(ValueError):
        construct_triple(alg("majority", 1), 1, 0)
    with pytest.raises(ValueError):
        construct_triple(alg("majority", 1), 0, 1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(4, 7), S=st.integers(1, 3))
def test_rounds_advance_only_on_quorum(seed, n, S):
    f = (n - 1) // 3
    inputs = {p: p % 2 for p in range(n)}
    sim, t = run_canonical(alg("echo-majority", S), n, f, inputs, schedule=Fuzzed(seed),
                           predicate=all_correct_decided)
    for m in sim.machines.values():
        assert sorted(m.sent) == list(range(1, m.round + 1))
        for r in range(1, m.round):
            assert m.count[r] >= n - f
        assert m.decided_round == S
    # mixed inputs: agreement is exactly what these algorithms cannot promise
    term = [c for c in check_convergence(t, ConvergenceSpec()) if c.name == "termination"]
    assert term[0].ok
