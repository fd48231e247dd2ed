"""Canonical-round algorithms and the three-execution construction.

A canonical-round algorithm is full-information: in round ``r`` a process
sends ``<r, history>`` to everybody, where ``history`` is its whole local
history, and it moves to round ``r + 1`` after receiving ``n - f`` round ``r``
messages.  After round ``S`` it applies the decision function ``omega`` to its
history, and keeps going.  In the communication-closed variant a message from
an earlier round is discarded on arrival.

Histories grow exponentially, so they are hash-consed in a
:class:`HistoryStore`; a payload carries the digest of the sender's history,
and equal digests mean equal histories.

:func:`construct_triple` builds the executions alpha0, alpha1, alpha2 with
``n = 5f`` that show no such algorithm solves nontrivial convergence in a
bounded number of rounds (and, with ``closed=True``, at all).
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import wire
from .sim import Deliver, Emit, Scripted, Simulation, WakeUp, indistinguishable


class HistoryStore:
    """Content-addressed store of histories.

    A history is either an initial state ``("I", pid, input)`` or an
    extension ``("A", parent, sender, round, message_digest)``.
    """

    def __init__(self):
        self.nodes: dict[str, tuple] = {}
        self._root: dict[str, tuple] = {}
        self._received: dict[str, tuple] = {}
        self.memo: dict = {}

    def _put(self, node) -> str:
        d = hashlib.sha256(wire.encode(list(node))).hexdigest()
        self.nodes.setdefault(d, node)
        return d

    def initial(self, pid, value) -> str:
        return self._put(("I", pid, value))

    def extend(self, parent, sender, rnd, msg) -> str:
        return self._put(("A", parent, sender, rnd, msg))

    def root(self, d) -> tuple:
        """``(pid, input)`` of the process whose history this is."""
        r = self._root.get(d)
        if r is None:
            node = self.nodes[d]
            chain = []
            while node[0] == "A":
                chain.append(d)
                d = node[1]
                node = self.nodes[d]
            r = (node[1], node[2])
            for c in chain:
                self._root[c] = r
            self._root[d] = r
        return r

    def received(self, d) -> tuple:
        """Receipts of the history, oldest first, as (sender, round, digest)."""
        got = self._received.get(d)
        if got is None:
            node = self.nodes[d]
            if node[0] == "I":
                got = ()
            else:
                got = self.received(node[1]) + ((node[2], node[3], node[4]),)
            self._received[d] = got
        return got


@dataclass(frozen=True)
class ConvergenceSpec:
    x0: object = 0
    x1: object = 1
    d0: object = 0
    d1: object = 1

    def __post_init__(self):
        if self.x0 == self.x1:
            raise ValueError("x0 and x1 must differ")
        if self.d0 == self.d1:
            raise ValueError("d0 and d1 must differ")


@dataclass
class CanonicalRoundAlgorithm:
    """``omega(store, history, ctx)`` maps a history digest to a decision.
    ``rounds`` is the decision round S; ``None`` means the process never
    decides (useful for inspecting message flow)."""

    omega: Callable
    rounds: Optional[int]
    name: str = ""


@dataclass
class OmegaContext:
    n: int
    f: int
    S: int
    spec: ConvergenceSpec


def message(rnd, digest) -> bytes:
    return wire.encode(["CR", rnd, digest])


def parse_message(obj):
    if not isinstance(obj, list) or len(obj) != 3 or obj[0] != "CR":
        return None
    rnd, d = obj[1], obj[2]
    if not isinstance(rnd, int) or isinstance(rnd, bool) or rnd < 1 or not isinstance(d, str):
        return None
    return rnd, d


class CanonicalRoundMachine:
    def __init__(self, n, f, me, value, alg: CanonicalRoundAlgorithm, store: HistoryStore,
                 closed=False, spec: Optional[ConvergenceSpec] = None):
        self.n = n
        self.f = f
        self.me = me
        self.alg = alg
        self.store = store
        self.closed = closed
        self.ctx = OmegaContext(n, f, alg.rounds or 0, spec or ConvergenceSpec())
        self.round = 1
        self.history = store.initial(me, value)
        self.count: Counter = Counter()
        self.buffered: dict[int, list] = {}
        self.sent: dict[int, str] = {}
        self.decided = False
        self.decision = None
        self.decided_round = None
        self.last_discarded = False

    def _send(self):
        self.sent[self.round] = self.history
        payload = message(self.round, self.history)
        return [(j, payload) for j in range(self.n)]

    def wakeup(self):
        return self._send()

    def _absorb(self, q, rnd, d):
        self.history = self.store.extend(self.history, q, rnd, d)
        self.count[rnd] += 1

    def receive(self, q, payload):
        self.last_discarded = False
        parsed = parse_message(wire.decode(payload))
        if parsed is None or parsed[1] not in self.store.nodes:
            return []
        rnd, d = parsed
        if self.closed:
            if rnd < self.round:
                self.last_discarded = True
                return []
            if rnd > self.round:
                self.buffered.setdefault(rnd, []).append((q, d))
                return []
        self._absorb(q, rnd, d)
        sends = []
        # a loop rather than a single test: buffered or early messages may
        # already complete the next round
        while self.count[self.round] >= self.n - self.f:
            if self.alg.rounds is not None and self.round == self.alg.rounds and not self.decided:
                self.decided = True
                self.decided_round = self.round
                self.decision = self.alg.omega(self.store, self.history, self.ctx)
            self.round += 1
            sends += self._send()
            for bq, bd in self.buffered.pop(self.round, []):
                self._absorb(bq, self.round, bd)
        return sends


# -- decision functions -------------------------------------------------------


def _majority(values, spec):
    # majority among the two distinguished inputs; ties go to x0
    c = Counter(wire.value_key(v) for v in values)
    k0, k1 = wire.value_key(spec.x0), wire.value_key(spec.x1)
    return spec.x1 if c[k1] > c[k0] else spec.x0


def _decision_for(v, spec):
    return spec.d1 if v == spec.x1 else spec.d0


def _round_msgs(store, d, rnd):
    return [m for (_q, r, m) in store.received(d) if r == rnd]


def omega_majority(store, d, ctx):
    """Majority of the inputs of the round-S senders (ties go to d0)."""
    inputs = [store.root(m)[1] for m in _round_msgs(store, d, ctx.S)]
    return _decision_for(_majority(inputs, ctx.spec), ctx.spec)


def omega_own_input(store, d, ctx):
    return _decision_for(store.root(d)[1], ctx.spec)


def omega_min_input(store, d, ctx):
    """Smallest input seen anywhere in the history (not a valid algorithm:
    one faulty message suffices to pull the decision down)."""
    seen = {store.root(d)[1]}
    stack = [d]
    visited = set()
    while stack:
        h = stack.pop()
        if h in visited:
            continue
        visited.add(h)
        seen.add(store.root(h)[1])
        stack.extend(m for (_q, _r, m) in store.received(h))
    return ctx.spec.d0 if ctx.spec.x0 in seen else ctx.spec.d1


def omega_constant(store, d, ctx):
    return ctx.spec.d0


def _estimate(store, d, ctx):
    # value carried by a message whose history is d: own input for round 1,
    # otherwise the majority of the estimates received in the previous round
    key = ("est", d)
    if key in store.memo:
        return store.memo[key]
    got = store.received(d)
    rounds = [r for (_q, r, _m) in got]
    if not rounds:
        v = store.root(d)[1]
    else:
        top = max(rounds)
        v = _majority([_estimate(store, m, ctx) for m in _round_msgs(store, d, top)], ctx.spec)
    store.memo[key] = v
    return v


def omega_echo_majority(store, d, ctx):
    """Iterated majority: every round each process adopts the majority of the
    estimates it received; decide the estimate after round S."""
    return _decision_for(_estimate(store, d, ctx), ctx.spec)


OMEGAS = {
    "majority": omega_majority,
    "own-input": omega_own_input,
    "min-input": omega_min_input,
    "constant": omega_constant,
    "echo-majority": omega_echo_majority,
}


def run_canonical(alg, n, f, inputs, faulty=(), adversary=None, schedule=None,
                  closed=False, max_events=100_000, store=None, predicate=None):
    store = store or HistoryStore()
    sim = Simulation(n, f, faulty, inputs,
                     lambda p: CanonicalRoundMachine(n, f, p, inputs[p], alg, store, closed),
                     adversary=adversary, schedule=schedule, label=f"canonical {alg.name}")
    trace = sim.run_until(predicate, max_events=max_events)
    return sim, trace


# -- the triple construction ---------------------------------------------------


@dataclass
class TripleExecution:
    sims: list
    traces: list
    groups: dict
    K: int
    closed: bool
    faulty: list
    spec: ConvergenceSpec
    alg: CanonicalRoundAlgorithm
    store: HistoryStore
    mirror_log: list = field(default_factory=list)

    def group(self, *names) -> list[int]:
        return sorted(p for g in names for p in self.groups[g])


def _groups(f):
    return {name: list(range(i * f, (i + 1) * f)) for i, name in enumerate("ABCDE")}


def _round_payload(sim, p, rnd):
    m = sim.machines[p]
    return message(rnd, m.sent[rnd])


def construct_triple(alg: CanonicalRoundAlgorithm, f: int, K: int, closed=False,
                     spec: Optional[ConvergenceSpec] = None) -> TripleExecution:
    if K < 1:
        raise ValueError("K must be at least 1")
    if f < 1:
        raise ValueError("f must be at least 1")
    spec = spec or ConvergenceSpec()
    n = 5 * f
    G = _groups(f)
    A, B, C, D, E = (G[x] for x in "ABCDE")
    everyone = list(range(n))
    faulty = [A, C, E]
    inputs = [
        {p: spec.x0 for p in everyone},
        {p: spec.x1 for p in everyone},
        {p: (spec.x0 if p in B + C else spec.x1) for p in everyone},
    ]
    store = HistoryStore()
    sims = []
    for i in range(3):
        inp = inputs[i]
        sims.append(Simulation(
            n, f, faulty[i], inp,
            lambda p, inp=inp: CanonicalRoundMachine(n, f, p, inp[p], alg, store, closed, spec),
            schedule=Scripted([]), label=f"alpha{i}"))
    # who wakes up
    if closed:
        live = [everyone, everyone, everyone]
    else:
        live = [A + B + C + E, A + C + D + E, everyone]
    # round-r senders heard by each recipient, and the late group (closed)
    heard = [
        {p: A + B + C + E for p in everyone},
        {p: A + C + D + E for p in everyone},
        {p: (A + C + D + E if p in A + D else A + B + C + E) for p in everyone},
    ]
    late = [
        {p: D for p in everyone},
        {p: B for p in everyone},
        {p: (B if p in A + D else D) for p in everyone},
    ]
    triple = TripleExecution(sims, [s.trace for s in sims], G, K, closed, faulty, spec, alg, store)

    for i, sim in enumerate(sims):
        for p in sorted(live[i]):
            sim.apply(WakeUp(p, Fraction(0)))

    for r in range(1, K + 1):
        t = Fraction(r)
        # Byzantine round-r messages copy correct round-r messages of a
        # paired execution
        plan = []
        for p in A:
            pay = _round_payload(sims[2], p, r)
            plan += [(0, p, q, pay, 2) for q in sims[0].correct if q in live[0]]
        for p in C:
            pay = _round_payload(sims[2], p, r)
            plan += [(1, p, q, pay, 2) for q in sims[1].correct if q in live[1]]
        for p in E:
            to_bc = _round_payload(sims[0], p, r)
            to_ad = _round_payload(sims[1], p, r)
            plan += [(2, p, q, to_bc if q in B + C else to_ad, 0 if q in B + C else 1)
                     for q in sims[2].correct]
        for i, p, q, pay, src in plan:
            sims[i].apply(Emit(p, q, pay, t - Fraction(1, 2)))
            triple.mirror_log.append((i, p, q, r, pay, src))
        # deliveries
        for i, sim in enumerate(sims):
            for q in sorted(sim.correct):
                if q not in live[i]:
                    continue
                if closed and r >= 2:
                    for s in late[i][q]:
                        _deliver_round(sim, s, q, r - 1, t)
                for s in heard[i][q]:
                    _deliver_round(sim, s, q, r, t)
    return triple


def _deliver_round(sim, s, q, rnd, t):
    head = sim.link_head(s, q)
    if head is None:
        raise AssertionError(f"{sim.trace.label}: no round {rnd} message on link {s}->{q}")
    parsed = parse_message(wire.decode(head.payload))
    if parsed is None or parsed[0] != rnd:
        raise AssertionError(f"{sim.trace.label}: expected round {rnd} on link {s}->{q}, got {parsed}")
    sim.apply(Deliver(s, q, head.link_seq, t))


def prefix(trace, r):
    """Shallow copy of ``trace`` keeping only events up to round ``r``."""
    out = copy_trace(trace)
    out.events = [e for e in trace.events if e.time <= r]
    return out


def copy_trace(trace):
    import copy as _copy
    out = _copy.copy(trace)
    out.__dict__.pop("_env_idx", None)
    return out


def claims_hold(triple: TripleExecution, r: Optional[int] = None) -> tuple[bool, bool]:
    """(alpha0 ~ alpha2 on B u C, alpha1 ~ alpha2 on A u D) for the prefix
    through round ``r`` (whole construction by default)."""
    a0, a1, a2 = triple.traces
    if r is not None:
        a0, a1, a2 = prefix(a0, r), prefix(a1, r), prefix(a2, r)
    return (indistinguishable(a0, a2, triple.group("B", "C")),
            indistinguishable(a1, a2, triple.group("A", "D")))


def _sent_round(trace, p, r):
    """Payloads of process ``p``'s round-``r`` messages in ``trace``."""
    out = set()
    for e in trace.message_log:
        if e.sender == p:
            parsed = parse_message(wire.decode(e.payload))
            if parsed is not None and parsed[0] == r:
                out.add(e.payload)
    return out


def mirroring_sound(triple: TripleExecution) -> bool:
    """Every Byzantine payload equals the round message of the same process
    in the paired execution (checked from the traces alone)."""
    a0, a1, a2 = triple.traces
    BC = set(triple.group("B", "C"))
    for i, trace in enumerate(triple.traces):
        for e in trace.message_log:
            if e.sender not in trace.faulty:
                continue
            parsed = parse_message(wire.decode(e.payload))
            if parsed is None:
                return False
            if i == 0 or i == 1:
                src = a2
            else:
                src = a0 if e.recipient in BC else a1
            if src.faulty and e.sender in src.faulty:
                return False
            if _sent_round(src, e.sender, parsed[0]) != {e.payload}:
                return False
    return True


def triple_from_traces(traces, K: int, closed: bool, spec: Optional[ConvergenceSpec] = None,
                       alg: Optional[CanonicalRoundAlgorithm] = None) -> TripleExecution:
    """Rebuild the inspectable part of a triple from stored traces."""
    if len(traces) != 3:
        raise ValueError("a triple has exactly three traces")
    f = traces[0].f
    return TripleExecution(None, list(traces), _groups(f), K, closed,
                           [sorted(t.faulty) for t in traces], spec or ConvergenceSpec(), alg, None)


@dataclass
class Verdict:
    verdict: str
    lines: list
    ok: bool

    def text(self):
        return "\n".join([self.verdict] + self.lines)


def check_violation(triple: TripleExecution, spec: Optional[ConvergenceSpec] = None) -> Verdict:
    """Classify the constructed triple.

    ``ok`` means the construction witnesses the impossibility for this
    algorithm: either agreement fails in alpha2, or the algorithm is invalid
    on alpha0/alpha1, or it does not decide within the inspected rounds.
    """
    spec = spec or triple.spec
    lines = []
    c1, c2 = claims_hold(triple)
    lines.append(f"claim alpha0~alpha2 on B,C: {'PASS' if c1 else 'FAIL'}")
    lines.append(f"claim alpha1~alpha2 on A,D: {'PASS' if c2 else 'FAIL'}")
    if not (c1 and c2 and mirroring_sound(triple)):
        return Verdict("construction unsound", lines, False)
    a0, a1, a2 = triple.traces
    BC, AD = triple.group("B", "C"), triple.group("A", "D")

    def decided(trace, group):
        return {p: trace.decisions[p] for p in group if p in trace.decisions}

    for idx, trace, want, name in ((0, a0, spec.d0, "α₀"), (1, a1, spec.d1, "α₁")):
        for p, d in sorted(trace.decisions.items()):
            if p in trace.faulty:
                continue
            if d.value != want:
                lines.append(f"alpha{idx}: process {p} decided {d.value!r}, expected {want!r}")
                return Verdict(f"validity violated in {name} (algorithm invalid)", lines, True)
    for idx, trace, group in ((0, a0, BC), (1, a1, AD)):
        missing = [p for p in group if p not in trace.decisions]
        if missing:
            lines.append(f"alpha{idx}: processes {missing} undecided after round {triple.K}")
            return Verdict(f"no decision by round {triple.K}", lines, True)
    bc = decided(a2, BC)
    ad = decided(a2, AD)
    lines.append("alpha2 decisions B,C: " + ", ".join(f"{p}={d.value!r}@r{int(d.time)}" for p, d in bc.items()))
    lines.append("alpha2 decisions A,D: " + ", ".join(f"{p}={d.value!r}@r{int(d.time)}" for p, d in ad.items()))
    values = {wire.value_key(d.value) for d in list(bc.values()) + list(ad.values())}
    if wire.value_key(spec.d0) in values and wire.value_key(spec.d1) in values:
        return Verdict("agreement violated in α₂", lines, True)
    return Verdict("no violation found", lines, False)
