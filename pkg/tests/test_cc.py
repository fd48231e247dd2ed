import itertools
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from gatherbft import wire
from gatherbft.campaign import TrialConfig, run_trial
from gatherbft.cc import (BOTTOM, CcError, ConnectedConsensus, CrusaderRB, combine, compatible,
                          crusader_rule, echo_message, evaluate_gather, final_vertex, iterations_for,
                          parse_echo)


def test_r_below_one_rejected():
    for R in (0, -1, 1.5):
        with pytest.raises(CcError):
            ConnectedConsensus(4, 1, 0, "v", R=R)
    with pytest.raises(CcError):
        ConnectedConsensus(3, 1, 0, "v")


@pytest.mark.parametrize("R,K", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4)])
def test_iterations_is_ceil_log2(R, K):
    # oracle: smallest K with 2**K >= R
    assert min(k for k in range(10) if 2 ** k >= R) == K
    assert iterations_for(R) == K


def test_evaluate_gather_examples():
    assert evaluate_gather({0: "v", 1: "v", 2: "v", 3: "w"}, 1, 4) == ("v", 4)
    assert evaluate_gather({0: "v", 1: "v", 2: "w", 3: "w"}, 1, 4) == (BOTTOM, 0)
    S = {0: "v", 1: "v", 2: "v", 3: "v", 4: "w", 5: "w", 6: "x"}
    assert evaluate_gather(S, 2, 2) == (BOTTOM, 0)
    S[6] = "v"
    assert evaluate_gather(S, 2, 2) == ("v", 2)


@settings(max_examples=200, deadline=None)
@given(vals=st.lists(st.sampled_from("abc"), min_size=4, max_size=10), f=st.integers(0, 3))
def test_evaluate_gather_matches_counting(vals, f):
    S = dict(enumerate(vals))
    count = Counter(vals).most_common(1)[0][1]
    got = evaluate_gather(S, f, 8)
    if count >= len(vals) - f:
        assert got[1] == 8 and Counter(vals)[got[0]] >= len(vals) - f
    else:
        assert got == (BOTTOM, 0)


def test_combine_and_compatibility():
    assert combine(("v", 4), (BOTTOM, 0)) == ("v", 2)
    assert combine((BOTTOM, 0), ("v", 4)) == ("v", 2)
    assert combine(("v", 4), ("v", 2)) == ("v", 3)
    assert compatible(("v", 1), (BOTTOM, 0))
    assert not compatible(("v", 1), ("w", 1))
    assert not compatible((BOTTOM, 0), (BOTTOM, 0))


def test_final_vertex_floors_grade():
    assert final_vertex(("v", Fraction(3, 2))) == ("v", 1)
    assert final_vertex(("v", Fraction(1, 2))) == (BOTTOM, 0)
    assert final_vertex(("v", 4)) == ("v", 4)
    assert final_vertex((BOTTOM, 0)) == (BOTTOM, 0)


def test_echo_parsing():
    msg = wire.decode(echo_message("E1", 1, ("v", Fraction(3, 4))))
    assert parse_echo(msg, 2, 4) == ("E1", 1, ("v", Fraction(3, 4)))
    assert parse_echo(msg, 0, 4) is None
    assert parse_echo(["CC", "E3", 1, "v", 1, 0], 2, 4) is None
    assert parse_echo(["CC", "E1", 1, "v", 9, 0], 2, 4) is None
    assert parse_echo(["CC", "E1", 1, "v", 1, -1], 2, 4) is None
    assert parse_echo(["CC", "E1", True, "v", 1, 0], 2, 4) is None
    with pytest.raises(ValueError):
        echo_message("E1", 1, ("v", Fraction(1, 3)))


def _echo(cc, peer, kind, t, k=1):
    return cc._on_echo(peer, wire.decode(echo_message(kind, k, t)))


def _kinds(sends):
    return {wire.decode(p)[1] for _, p in sends}


def test_echo1_relays_at_f_plus_one_and_echo2_at_n_minus_f():
    cc = ConnectedConsensus(4, 1, 0, "v", R=2)
    t = ("w", Fraction(2))
    assert _echo(cc, 1, "E1", t) == []
    assert _kinds(_echo(cc, 2, "E1", t)) == {"E1"}
    out = _echo(cc, 3, "E1", t)
    assert _kinds(out) == {"E2"} and len(out) == 4
    assert cc.approved[1] == [t]
    # a second tuple reaching n - f echoes is approved but gets no second echo2
    u = (BOTTOM, Fraction(0))
    for p in (1, 2, 3):
        out = _echo(cc, p, "E1", u)
    assert "E2" not in _kinds(out)
    assert cc.approved[1] == [t, u]


def test_echo2_quorum_approves():
    cc = ConnectedConsensus(4, 1, 0, "v", R=2)
    t = ("v", Fraction(2))
    for p in (1, 2):
        _echo(cc, p, "E2", t)
    assert cc.approved[1] == []
    _echo(cc, 3, "E2", t)
    assert cc.approved[1] == [t]
    assert _echo(cc, 3, "E2", t) == []


def test_crusader_rb_rejects_small_n():
    with pytest.raises(CcError):
        CrusaderRB(4, 1, 0, "v")
    CrusaderRB(5, 1, 0, "v")


@pytest.mark.parametrize("f", [1, 2])
def test_crusader_rule_enumeration(f):
    size = 4 * f
    for W in itertools.combinations_with_replacement("ab", size):
        got = crusader_rule(list(W), f)
        c = Counter(W)
        winners = [v for v in "ab" if c[v] >= size - f]
        assert got == (winners[0] if winners else BOTTOM)


# -- properties ---------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**40), n=st.sampled_from([4, 5, 7]), R=st.sampled_from([1, 2, 3, 4, 8]),
       binding=st.booleans())
def test_connected_consensus_properties(seed, n, R, binding):
    res = run_trial(TrialConfig("cc", n, (n - 1) // 3, seed, R=R, binding=binding))
    for c in res.checks:
        assert c.ok, c.line()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**40))
def test_crusader_via_rb_properties(seed):
    res = run_trial(TrialConfig("crusader-rb", 5, 1, seed))
    for c in res.checks:
        assert c.ok, c.line()
