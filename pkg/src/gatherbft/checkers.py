"""Trace-level predicates for the problems the protocols solve.

Everything here is a pure function over traces, decisions and pair sets.
Verdicts are :class:`Check` records: a property name, pass/fail and a short
detail string; :func:`report_lines` renders a list of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from . import wire
from .rounds import ConvergenceSpec

BOTTOM = None


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def report_lines(checks: Iterable[Check]) -> list[str]:
    return [c.line() for c in checks]


def failures(checks: Iterable[Check]) -> list[Check]:
    return [c for c in checks if not c.ok]


def _k(v):
    return wire.value_key(v)


# -- nontrivial convergence --------------------------------------------------------


def check_convergence(trace, spec: ConvergenceSpec) -> list[Check]:
    """Agreement (never both d0 and d1), validity (all inputs x_i implies every
    decision is d_i) and termination (every correct process decided)."""
    correct = trace.correct
    dec = {p: trace.decisions[p].value for p in correct if p in trace.decisions}
    keys = {_k(v) for v in dec.values()}
    both = _k(spec.d0) in keys and _k(spec.d1) in keys
    checks = [Check("agreement", not both, "decisions include both d0 and d1" if both else "")]
    inputs = {_k(trace.inputs.get(p)) for p in correct}
    ok = True
    detail = ""
    for x, d in ((spec.x0, spec.d0), (spec.x1, spec.d1)):
        if inputs == {_k(x)}:
            bad = sorted(p for p, v in dec.items() if _k(v) != _k(d))
            if bad:
                ok = False
                detail = f"all inputs {x!r} but processes {bad} decided otherwise"
    checks.append(Check("validity", ok, detail))
    missing = sorted(p for p in correct if p not in dec)
    checks.append(Check("termination", not missing, f"undecided processes {missing}" if missing else ""))
    return checks


# -- the star-of-paths graph -------------------------------------------------------


def valid_vertex(u, R) -> bool:
    v, g = u
    if v is BOTTOM:
        return g == 0
    return isinstance(g, int) and 1 <= g <= R


def tree_distance(u, w, R) -> int:
    """Distance in the graph with center (None, 0) and one path of length R per
    value."""
    if not (valid_vertex(u, R) and valid_vertex(w, R)):
        raise ValueError(f"invalid vertex in {u!r}, {w!r} for R={R}")
    (v1, g1), (v2, g2) = u, w
    if v1 is BOTTOM or v2 is BOTTOM or _k(v1) == _k(v2):
        return abs(g1 - g2)
    return g1 + g2


def in_validity_tree(d, inputs, R) -> bool:
    """Is ``d`` on the smallest subtree spanning the leaves (v, R) of the
    correct inputs?"""
    if not valid_vertex(d, R):
        return False
    values = {_k(v) for v in inputs}
    if not values:
        return False
    v, g = d
    if len(values) == 1:
        return v is not BOTTOM and _k(v) in values and g == R
    if v is BOTTOM:
        return True
    return _k(v) in values


# -- common core and binding -------------------------------------------------------


@dataclass
class CoreReport:
    intersection: dict
    size: int
    satisfied: bool


def pair_items(S: dict) -> set:
    return {(k, _k(v)) for k, v in S.items()}


def common_core(outputs: dict, n: int, f: int) -> CoreReport:
    outs = list(outputs.values())
    if not outs:
        raise ValueError("common_core needs at least one output")
    inter = pair_items(outs[0])
    for S in outs[1:]:
        inter &= pair_items(S)
    first = outs[0]
    core = {k: first[k] for k, _ in inter}
    return CoreReport(core, len(core), len(core) >= n - f)


@dataclass
class BindingVerdict:
    ok: bool
    mode: str
    extensions: int
    detail: str
    intersection: Optional[dict] = None

    def line(self) -> str:
        return (f"{'PASS' if self.ok else 'FAIL'} binding ({self.mode}, "
                f"{self.extensions} extensions): {self.detail}")


def check_binding(extension_outputs: list, n: int, f: int, kind: str = "gather",
                  mode: str = "sampled") -> BindingVerdict:
    """``extension_outputs`` holds, per extension, the map of correct outputs
    (gather pair sets, or cc decision vertices).  Sampling extensions can only
    refute binding, never prove it; ``mode`` records how they were obtained."""
    if len(extension_outputs) < 2:
        raise ValueError("need at least two extensions")
    if kind == "gather":
        merged = {}
        i = 0
        for outs in extension_outputs:
            for p, S in outs.items():
                merged[(i, p)] = S
                i += 1
        rep = common_core(merged, n, f)
        ids = sorted(rep.intersection)
        return BindingVerdict(rep.satisfied, mode, len(extension_outputs),
                              f"intersection {ids} of size {rep.size} (need {n - f})",
                              rep.intersection)
    if kind == "cc":
        values = set()
        for outs in extension_outputs:
            for d in outs.values():
                if d[0] is not BOTTOM:
                    values.add(_k(d[0]))
        return BindingVerdict(len(values) <= 1, mode, len(extension_outputs),
                              f"non-bottom decision values {sorted(values)}")
    raise ValueError(f"unknown kind {kind!r}")


# -- protocol properties over traces ---------------------------------------------------


def check_rb(trace, sender, sender_value=None) -> list[Check]:
    dec = trace.correct_decisions()
    keys = {_k(v) for v in dec.values()}
    checks = [Check("rb agreement", len(keys) <= 1, f"accepted values {sorted(keys)}" if len(keys) > 1 else "")]
    if sender not in trace.faulty:
        bad = sorted(p for p in trace.correct if p not in dec or _k(dec[p]) != _k(sender_value))
        checks.append(Check("rb validity", not bad, f"processes {bad} did not accept the sender's value" if bad else ""))
    if dec:
        missing = sorted(p for p in trace.correct if p not in dec)
        checks.append(Check("rb totality", not missing, f"processes {missing} never accepted" if missing else ""))
    return checks


def check_gather(trace) -> list[Check]:
    n, f = trace.n, trace.f
    outs = trace.correct_decisions()
    checks = []
    missing = trace.undecided()
    checks.append(Check("gather termination", not missing, f"undecided processes {missing}" if missing else ""))
    seen = {}
    agree = True
    for p, S in outs.items():
        for k, v in S.items():
            if k in seen and seen[k] != _k(v):
                agree = False
            seen.setdefault(k, _k(v))
    checks.append(Check("gather agreement", agree))
    bad = []
    for p, S in outs.items():
        for j, v in S.items():
            if j not in trace.faulty and _k(v) != _k(trace.inputs.get(j)):
                bad.append((p, j))
    checks.append(Check("gather validity", not bad, f"wrong pairs {bad}" if bad else ""))
    small = sorted(p for p, S in outs.items() if len(S) < n - f)
    checks.append(Check("gather output size", not small, f"outputs of {small} below n-f" if small else ""))
    if outs:
        rep = common_core(outs, n, f)
        checks.append(Check("gather common core", rep.satisfied,
                            f"intersection size {rep.size}, n-f = {n - f}"))
    return checks


def grade_diameter(tuples) -> Fraction:
    """Diameter of a set of graded tuples measured along the tree (bottom
    counts as the center)."""
    best = Fraction(0)
    ts = list(tuples)
    for i, (v1, g1) in enumerate(ts):
        for v2, g2 in ts[i + 1:]:
            if v1 is BOTTOM or v2 is BOTTOM or _k(v1) == _k(v2):
                d = abs(Fraction(g1) - Fraction(g2))
            else:
                d = Fraction(g1) + Fraction(g2)
            best = max(best, d)
    return best


def check_cc(trace, R, machines=None) -> list[Check]:
    """Agreement, validity and termination from the trace; when the machines
    are available, also the per-iteration invariants."""
    dec = trace.correct_decisions()
    checks = []
    missing = trace.undecided()
    checks.append(Check("cc termination", not missing, f"undecided processes {missing}" if missing else ""))
    far = []
    ps = sorted(dec)
    for i, p in enumerate(ps):
        for q in ps[i + 1:]:
            if tree_distance(dec[p], dec[q], R) > 1:
                far.append((p, q))
    checks.append(Check("cc agreement", not far, f"pairs at distance > 1: {far}" if far else ""))
    inputs = [trace.inputs.get(p) for p in trace.correct]
    outside = sorted(p for p, d in dec.items() if not in_validity_tree(d, inputs, R))
    checks.append(Check("cc validity", not outside, f"decisions of {outside} outside the input subtree" if outside else ""))
    checks.append(Check("cc echo2 once per iteration", not _repeat_echo2(trace)))
    checks.append(Check("cc no anomalies", not trace.anomalies, "; ".join(trace.anomalies[:3])))
    if machines is not None:
        ms = [machines[p] for p in trace.correct if p in machines]
        picks = {_k(m.picked[0]) for m in ms if m.picked is not None and m.picked[0] is not BOTTOM}
        checks.append(Check("cc branch uniqueness", len(picks) <= 1, f"picked {sorted(picks)}" if len(picks) > 1 else ""))
        K = ms[0].K if ms else 0
        worst = []
        big = []
        foreign = []
        for k in range(1, K + 1):
            ends = [m.iterations[k]["end"] for m in ms if k in m.iterations and m.iterations[k]["end"] is not None]
            starts = {_tk(m.iterations[k]["start"]) for m in ms if k in m.iterations}
            if ends and grade_diameter(ends) > Fraction(R, 2 ** k):
                worst.append(k)
            for m in ms:
                if len(m.approved[k]) > 2:
                    big.append((m.me, k))
                for t in m.approved[k]:
                    if _tk(t) not in starts:
                        foreign.append((m.me, k))
        checks.append(Check("cc grade contraction", not worst, f"iterations {worst} above R/2^k" if worst else ""))
        checks.append(Check("cc at most two approved tuples", not big, f"{big}" if big else ""))
        checks.append(Check("cc approved tuples come from correct starts", not foreign, f"{foreign}" if foreign else ""))
    return checks


def _tk(t):
    g = Fraction(t[1])
    return _k([t[0], g.numerator, g.denominator])


def _repeat_echo2(trace) -> list:
    seen = {}
    bad = []
    for e in trace.message_log:
        if e.sender in trace.faulty:
            continue
        obj = wire.decode(e.payload)
        if isinstance(obj, list) and len(obj) == 6 and obj[0] == "CC" and obj[1] == "E2":
            key = (e.sender, e.recipient, obj[2])
            if key in seen:
                bad.append(key)
            seen[key] = e.payload
    return bad


def check_crusader(trace) -> list[Check]:
    dec = trace.correct_decisions()
    vals = {_k(v) for v in dec.values() if v is not BOTTOM}
    checks = [Check("crusader agreement", len(vals) <= 1, f"non-bottom decisions {sorted(vals)}" if len(vals) > 1 else "")]
    inputs = {_k(trace.inputs.get(p)) for p in trace.correct}
    if len(inputs) == 1:
        (x,) = inputs
        bad = sorted(p for p, v in dec.items() if _k(v) != x)
        checks.append(Check("crusader validity", not bad, f"processes {bad} did not decide the common input" if bad else ""))
    else:
        checks.append(Check("crusader validity", True))
    missing = trace.undecided()
    checks.append(Check("crusader termination", not missing, f"undecided processes {missing}" if missing else ""))
    return checks
