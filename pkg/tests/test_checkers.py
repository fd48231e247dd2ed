from collections import deque
from fractions import Fraction
from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from gatherbft.checkers import (BOTTOM, check_binding, check_convergence, common_core, grade_diameter,
                                in_validity_tree, tree_distance, valid_vertex)
from gatherbft.rounds import ConvergenceSpec


def fake_trace(inputs, decisions, faulty=()):
    correct = [p for p in inputs if p not in faulty]
    return SimpleNamespace(correct=correct, inputs=inputs,
                           decisions={p: SimpleNamespace(value=v) for p, v in decisions.items()})


def names(checks):
    return {c.name: c.ok for c in checks}


def test_convergence_examples():
    spec = ConvergenceSpec()
    assert names(check_convergence(fake_trace({0: 0, 1: 1}, {0: 0, 1: 1}), spec)) == \
        {"agreement": False, "validity": True, "termination": True}
    assert names(check_convergence(fake_trace({0: 1, 1: 1}, {0: 0, 1: 1}), spec)) == \
        {"agreement": False, "validity": False, "termination": True}
    assert names(check_convergence(fake_trace({0: 1, 1: 1}, {0: 1}), spec)) == \
        {"agreement": True, "validity": True, "termination": False}
    # a faulty process's decision does not count
    assert names(check_convergence(fake_trace({0: 0, 1: 0, 2: 1}, {0: 0, 1: 0, 2: 1}, {2}), spec))["agreement"]


def _vertices(R, values):
    return [(BOTTOM, 0)] + [(v, g) for v in values for g in range(1, R + 1)]


def _bfs(R, values):
    vs = _vertices(R, values)
    adj = {u: set() for u in vs}
    for v in values:
        path = [(BOTTOM, 0)] + [(v, g) for g in range(1, R + 1)]
        for a, b in zip(path, path[1:]):
            adj[a].add(b)
            adj[b].add(a)
    dist = {}
    for s in vs:
        seen = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen[w] = seen[u] + 1
                    q.append(w)
        for t, d in seen.items():
            dist[s, t] = d
    return vs, dist


@pytest.mark.parametrize("R", [1, 2, 3, 5])
def test_tree_distance_matches_bfs(R):
    vs, dist = _bfs(R, "abc")
    for u in vs:
        for w in vs:
            assert tree_distance(u, w, R) == dist[u, w]


def test_tree_distance_examples_and_errors():
    assert tree_distance(("a", 2), ("b", 1), 2) == 3
    assert tree_distance(("a", 2), (BOTTOM, 0), 2) == 2
    assert tree_distance(("a", 2), ("a", 1), 2) == 1
    for bad in (("a", 0), ("a", 3), (BOTTOM, 1)):
        assert not valid_vertex(bad, 2)
        with pytest.raises(ValueError):
            tree_distance(bad, (BOTTOM, 0), 2)


def test_validity_tree():
    assert in_validity_tree(("a", 3), ["a", "a"], 3)
    assert not in_validity_tree(("a", 2), ["a", "a"], 3)
    assert not in_validity_tree((BOTTOM, 0), ["a"], 3)
    assert in_validity_tree((BOTTOM, 0), ["a", "b"], 3)
    assert in_validity_tree(("b", 1), ["a", "b"], 3)
    assert not in_validity_tree(("c", 1), ["a", "b"], 3)
    assert not in_validity_tree(("a", 4), ["a", "b"], 3)


def test_grade_diameter():
    assert grade_diameter([("a", Fraction(1, 2)), ("b", Fraction(1, 4))]) == Fraction(3, 4)
    assert grade_diameter([("a", 2), (BOTTOM, 0), ("a", 1)]) == 2
    assert grade_diameter([]) == 0


def test_common_core_examples():
    outs = {0: {0: "x", 1: "y", 2: "z"}, 1: {0: "x", 1: "y", 3: "w"}}
    rep = common_core(outs, 4, 1)
    assert rep.intersection == {0: "x", 1: "y"} and not rep.satisfied
    outs[1][1] = "other"
    assert common_core(outs, 4, 1).size == 1
    with pytest.raises(ValueError):
        common_core({}, 4, 1)


@settings(max_examples=100, deadline=None)
@given(sets=st.lists(st.dictionaries(st.integers(0, 6), st.sampled_from("ab"), max_size=7), min_size=1, max_size=5),
       extra=st.dictionaries(st.integers(0, 6), st.sampled_from("ab"), max_size=7))
def test_common_core_shrinks_as_outputs_are_added(sets, extra):
    outs = dict(enumerate(sets))
    before = common_core(outs, 7, 2)
    outs[len(outs)] = extra
    after = common_core(outs, 7, 2)
    assert set(after.intersection.items()) <= set(before.intersection.items())
    assert all(all(S.get(k) == v for S in outs.values()) for k, v in after.intersection.items())


def test_binding_examples():
    e1 = {0: {0: 1, 1: 1, 2: 1}}
    e2 = {0: {0: 1, 1: 1, 2: 1, 3: 1}, 1: {0: 1, 1: 1, 2: 1}}
    v = check_binding([e1, e2], 4, 1)
    assert v.ok and sorted(v.intersection) == [0, 1, 2]
    e3 = {1: {1: 1, 2: 1, 3: 1}}
    v = check_binding([e1, e2, e3], 4, 1, mode="constructed")
    assert not v.ok and v.intersection == {1: 1, 2: 1}
    assert v.line().startswith("FAIL binding (constructed, 3 extensions)")
    with pytest.raises(ValueError):
        check_binding([e1], 4, 1)
    with pytest.raises(ValueError):
        check_binding([e1, e2], 4, 1, kind="nope")


def test_binding_cc_kind():
    assert check_binding([{0: ("a", 1)}, {0: (BOTTOM, 0), 1: ("a", 2)}], 4, 1, kind="cc").ok
    assert not check_binding([{0: ("a", 1)}, {0: ("b", 1)}], 4, 1, kind="cc").ok
