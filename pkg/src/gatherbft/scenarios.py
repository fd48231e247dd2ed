"""Named, self-contained scenarios.

Each scenario has a *builder* that produces traces and an *assessor* that
turns traces into a :class:`Report`.  Assessors read nothing but the traces
(parameters travel in ``trace.meta``), so re-checking a stored trace file
gives the same report as the live run.

Process ids are 0-based internally.  Reports about the reference examples
print them 1-based, which is how those examples number processes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import wire
from .adversary import RandomGatherAdversary, Watcher
from .cc import ConnectedConsensus, CrusaderRB, iterations_for
from .checkers import (Check, check_binding, check_cc, check_crusader, check_gather, check_rb,
                       common_core, report_lines)
from .gather import RB_TAG, GatherMachine, parse_phase, phase_message
from .rb import ECHO, INIT, READY, RbMachine, parse_rb, rb_message
from .rounds import (OMEGAS, CanonicalRoundAlgorithm, check_violation,
                     claims_hold, construct_triple, mirroring_sound, triple_from_traces)
from .sim import (Fuzzed, Simulation, Timed, UndefinedTime, all_correct_decided,
                  any_correct_decided, indistinguishable, max_correct_delay, normalized_time,
                  unit_delay)
from .timing import GapAdversary, GapPlan, GapPolicy, LateBroadcast, binding_plan, nonbinding_plan


class ScenarioError(ValueError):
    pass


@dataclass
class Report:
    name: str
    lines: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def text(self) -> str:
        out = [f"scenario {self.name}"] + [f"  {l}" for l in self.lines]
        out += report_lines(self.checks)
        out.append(f"result: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(out) + "\n"

    def as_dict(self) -> dict:
        return {
            "scenario": self.name,
            "ok": self.ok,
            "lines": list(self.lines),
            "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in self.checks],
        }

    def json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, ensure_ascii=False) + "\n"


@dataclass
class Scenario:
    name: str
    build: Callable
    assess: Callable
    defaults: dict
    summary: str


CATALOG: dict[str, Scenario] = {}


def scenario(name, summary, **defaults):
    def deco(build):
        CATALOG[name] = Scenario(name, build, None, defaults, summary)
        return build
    return deco


def assessor(name):
    def deco(fn):
        CATALOG[name].assess = fn
        return fn
    return deco


def run_scenario(name, **params):
    """Build and assess ``name``; returns ``(report, traces)``."""
    if name not in CATALOG:
        raise ScenarioError(f"unknown scenario {name!r}; known: {', '.join(sorted(CATALOG))}")
    sc = CATALOG[name]
    unknown = set(params) - set(sc.defaults)
    if unknown:
        raise ScenarioError(f"scenario {name} does not take {sorted(unknown)}")
    full = dict(sc.defaults)
    full.update({k: v for k, v in params.items() if v is not None})
    traces = sc.build(**full)
    for t in traces:
        t.meta = dict(t.meta, scenario=name, params=full)
    return sc.assess(traces), traces


def assess_traces(traces) -> Report:
    """Re-assess stored traces with the scenario named in their metadata."""
    if not traces:
        raise ScenarioError("no traces")
    name = traces[0].meta.get("scenario")
    if name not in CATALOG:
        raise ScenarioError(f"traces carry no known scenario name (got {name!r})")
    return CATALOG[name].assess(traces)


def _ids(ids, one_based=True):
    return ",".join(str(i + 1 if one_based else i) for i in sorted(ids))


def _time(trace):
    try:
        return normalized_time(trace)
    except UndefinedTime as exc:
        return exc


def _phase_sets(trace):
    """Per correct process: {phase: pair dict} from the phase messages it sent
    to itself."""
    out = {p: {} for p in trace.correct}
    for e in trace.message_log:
        if e.sender in trace.faulty or e.recipient != e.sender:
            continue
        ph = parse_phase(wire.decode(e.payload), trace.n)
        if ph is not None:
            out[e.sender].setdefault(ph[0], ph[1])
    return out


# -- the no-common-core schedule ---------------------------------------------------------

# 1-based reference values: T_i and U_i of p1..p5; p6 and p7 are faulty
TABLE1_T = {1: {1, 4, 5, 6, 7}, 2: {2, 4, 5, 6, 7}, 3: {3, 4, 5, 6, 7}, 4: {2, 3, 4, 6, 7}, 5: {1, 4, 5, 6, 7}}
TABLE1_U = {1: {1, 3, 4, 5, 6, 7}, 2: {1, 2, 4, 5, 6, 7}, 3: {2, 3, 4, 5, 6, 7}, 4: {2, 3, 4, 5, 6, 7},
            5: {1, 2, 4, 5, 6, 7}}
# correct processes whose T sets make up each U
TABLE1_APPROVED = {1: {1, 3, 5}, 2: {1, 2, 5}, 3: {2, 3, 4}, 4: {2, 3, 4}, 5: {1, 2, 5}}


def _zb(d):
    return {p - 1: {x - 1 for x in s} for p, s in d.items()}


class Table1Policy:
    """Readys from correct senders whose phase-2 message the recipient must
    not approve early arrive late; everything else takes one unit."""

    def __init__(self, approved_from):
        self.approved_from = approved_from

    def __call__(self, env, sim):
        rb = parse_rb(wire.decode(env.payload))
        if rb is not None and rb[2] == READY and env.recipient in self.approved_from \
                and env.sender not in self.approved_from[env.recipient]:
            return Fraction(8)
        return Fraction(1)


class Table1Adversary(Watcher):
    """The faulty pair broadcasts honestly, pushes each correct process to
    accept exactly the pairs of its T set first, returns every phase message
    to its sender, and completes the U sets before the remaining pairs."""

    def __init__(self, inputs, T, U):
        super().__init__()
        self.inputs = inputs
        self.T = T
        self.U = U

    def start(self, sim):
        n = sim.n
        for b in sorted(sim.faulty):
            for i in sim.correct:
                sim.emit(b, i, rb_message(b, RB_TAG, INIT, self.inputs[b]), at=Fraction(1))
                for s in range(n):
                    sim.emit(b, i, rb_message(s, RB_TAG, ECHO, self.inputs[s]), at=Fraction(2))
                for s in sorted(self.T[i]):
                    sim.emit(b, i, rb_message(s, RB_TAG, READY, self.inputs[s]), at=Fraction(3))

    def on_send(self, sim, env):
        obj = wire.decode(env.payload)
        if env.recipient != env.sender or parse_phase(obj, sim.n) is None:
            return
        i = env.sender
        rest = set(range(sim.n)) - self.U[i]
        for b in sorted(sim.faulty):
            sim.emit(b, i, env.payload, delay=Fraction(1))
            if obj[1] == 2:
                for s in sorted(self.U[i] - self.T[i]):
                    sim.emit(b, i, rb_message(s, RB_TAG, READY, self.inputs[s]), at=Fraction(9, 2))
                for s in sorted(rest):
                    sim.emit(b, i, rb_message(s, RB_TAG, READY, self.inputs[s]), at=Fraction(10))


def table1_schedule(binding=False):
    n, f = 7, 2
    inputs = {p: p + 1 for p in range(n)}
    T, U = _zb(TABLE1_T), _zb(TABLE1_U)
    approved_from = {i: {x - 1 for x in TABLE1_APPROVED[i + 1]} for i in T}
    sim = Simulation(n, f, {5, 6}, inputs,
                     lambda p: GatherMachine(n, f, p, inputs[p], binding=binding),
                     adversary=Table1Adversary(inputs, T, U), schedule=Timed(Table1Policy(approved_from)),
                     label="table1")
    return sim


@scenario("table1", "n=7, f=2 schedule with no common core after phase 2", binding=False, max_events=200_000)
def build_table1(binding, max_events):
    sim = table1_schedule(binding)
    return [sim.run_until(all_correct_decided, max_events=max_events)]


@assessor("table1")
def assess_table1(traces):
    (t,) = traces
    rep = Report("table1")
    sets = _phase_sets(t)
    T = {p: set(sets[p].get(2, {})) for p in t.correct}
    U = {p: set(sets[p].get(3, {})) for p in t.correct}
    V = {}
    for p in t.correct:
        if 4 in sets[p]:
            V[p] = sets[p][4]
        elif p in t.decisions:
            V[p] = t.decisions[p].value
    for p in t.correct:
        rep.lines.append(f"p{p + 1}: T={_ids(T[p])} U={_ids(U[p])} V={_ids(V.get(p, {}))}")
    rep.checks.append(Check("T sets match the reference table", {p + 1: {x + 1 for x in s} for p, s in T.items()} == TABLE1_T))
    rep.checks.append(Check("U sets match the reference table", {p + 1: {x + 1 for x in s} for p, s in U.items()} == TABLE1_U))
    inter_u = set.intersection(*U.values()) if U else set()
    rep.checks.append(Check("no common core after phase 2", len(inter_u) == 4 and len(inter_u) < t.n - t.f,
                            f"|∩U| = {len(inter_u)} ({_ids(inter_u)}), n-f = {t.n - t.f}"))
    if len(V) == len(t.correct):
        core = common_core(V, t.n, t.f)
        rep.checks.append(Check("common core after phase 3", core.satisfied,
                                f"|∩V| = {core.size} ({_ids(core.intersection)})"))
    else:
        rep.checks.append(Check("common core after phase 3", False, "some process never computed V"))
    rep.checks += check_gather(t)
    return rep


# -- the f = 1 corner ---------------------------------------------------------------
#
# Correct p1, p2, p3 (ids 0..2), faulty p4 (id 3); input of p_i is i.  In the
# prefix p1 returns {1,2,3,4} after phase 2 while p2 and p3 have not
# returned; two extensions then make p2 return {1,2,3} and {2,3,4}.

F1_BYZ = 3


def _kind(env):
    obj = wire.decode(env.payload)
    rb = parse_rb(obj)
    if rb is not None:
        return rb[2]
    ph = parse_phase(obj, 4)
    return ph[0] if ph else None


class F1Prefix:
    def __call__(self, env, sim):
        if (env.sender, env.recipient) == (2, 1):
            return None
        if env.recipient == 2 and _kind(env) == READY:
            return None
        if (env.sender, env.recipient) == (1, 1) and _kind(env) == 2:
            return None
        return Fraction(1)


class F1Extension:
    def __init__(self, blocked):
        self.blocked = blocked

    def __call__(self, env, sim):
        if (env.sender, env.recipient) == self.blocked:
            return None
        if (env.sender, env.recipient) == (1, 1):
            return Fraction(10)
        return Fraction(1)


class F1PrefixAdversary(Watcher):
    """Lets p1 and p2 accept the pairs the prefix needs and returns p1's phase
    messages to it."""

    def __init__(self, inputs):
        super().__init__()
        self.inputs = inputs

    def start(self, sim):
        B, inp = F1_BYZ, self.inputs
        for i in range(3):
            sim.emit(B, i, rb_message(B, RB_TAG, INIT, inp[B]), at=Fraction(6, 5))
            for s in range(4):
                if (s, i) != (0, 1):
                    sim.emit(B, i, rb_message(s, RB_TAG, ECHO, inp[s]), at=Fraction(11, 5) if s == B else Fraction(2))
        for i in (0, 1):
            for s in range(4):
                if (s, i) != (0, 1):
                    sim.emit(B, i, rb_message(s, RB_TAG, READY, inp[s]), at=Fraction(21, 5) if s == B else Fraction(3))

    def on_send(self, sim, env):
        if (env.sender, env.recipient) == (0, 0) and parse_phase(wire.decode(env.payload), 4):
            sim.emit(F1_BYZ, 0, env.payload, delay=Fraction(1))


def f1_prefix(binding=False, f1_shortcut=True):
    n, f = 4, 1
    inputs = {p: p + 1 for p in range(n)}
    sim = Simulation(n, f, {F1_BYZ}, inputs,
                     lambda p: GatherMachine(n, f, p, inputs[p], binding=binding, f1_shortcut=f1_shortcut),
                     adversary=F1PrefixAdversary(inputs), schedule=Timed(F1Prefix()), label="prefix")
    sim.run_until(any_correct_decided)
    return sim


def f1_extension(prefix_sim, which):
    """Extension ``which`` (1 or 2) of the counterexample prefix."""
    sim = prefix_sim.fork()
    sim.trace.label = f"extension {which}"
    sim.adversary = Watcher()
    sim.adversary._cursor = len(sim.trace.message_log)
    B, inp = F1_BYZ, sim.trace.inputs
    if which == 1:
        sim.reschedule(Timed(F1Extension((1, 2))))
        for s in (0, 1, 2):
            sim.emit(B, 2, rb_message(s, RB_TAG, READY, inp[s]), delay=Fraction(1))
        sim.emit(B, 1, rb_message(0, RB_TAG, READY, inp[0]), delay=Fraction(1))
        sim.emit(B, 1, phase_message(2, {0: 1, 1: 2, 2: 3}), delay=Fraction(2))
    else:
        sim.reschedule(Timed(F1Extension((0, 2))))
        for s in (1, 2, 3):
            sim.emit(B, 2, rb_message(s, RB_TAG, READY, inp[s]), delay=Fraction(1))
        sim.emit(B, 1, phase_message(2, {1: 2, 2: 3, 3: 4}), delay=Fraction(2))
    sim.run_until(lambda t: 1 in t.decisions)
    return sim


def f1_fuzz_extensions(prefix_sim, count, seed):
    """Fuzzed continuations: each uses its own delay seed and a fresh random
    faulty process that starts from the current point of the log."""
    sims = []
    for k in range(count):
        s = prefix_sim.fork()
        s.trace.label = f"extension {k + 1}"
        adv = RandomGatherAdversary(seed * 1000 + k, values=(1, 2, 3, 4))
        adv._cursor = len(s.trace.message_log)
        s.adversary = adv
        s.reschedule(Fuzzed(seed * 1000 + k, delays=(Fraction(1, 4), Fraction(1, 2), Fraction(1))))
        s.run_until(all_correct_decided, max_events=50_000)
        sims.append(s)
    return sims


@scenario("f1-corner", "n=4, f=1: phase-2 output is not binding; the 3-phase shortcut is",
          binding=False, extensions=24, seed=0)
def build_f1(binding, extensions, seed):
    if not binding:
        prefix = f1_prefix(binding=False)
        fork_at = len(prefix.trace.events)
        traces = [f1_extension(prefix, 1).trace, f1_extension(prefix, 2).trace]
    else:
        # any prefix up to the first correct return will do; take a fuzzed one
        n, f = 4, 1
        inputs = {p: p + 1 for p in range(n)}
        prefix = Simulation(n, f, {F1_BYZ}, inputs,
                            lambda p: GatherMachine(n, f, p, inputs[p], binding=True, f1_shortcut=True),
                            adversary=RandomGatherAdversary(seed, values=(1, 2, 3, 4)),
                            schedule=Fuzzed(seed, delays=(Fraction(1, 4), Fraction(1, 2), Fraction(1))),
                            label="prefix")
        prefix.run_until(any_correct_decided)
        fork_at = len(prefix.trace.events)
        traces = [s.trace for s in f1_fuzz_extensions(prefix, extensions, seed)]
    for t in traces:
        t.meta = dict(t.meta, fork_at=fork_at)
    return traces


def _binding_line(v):
    ids = _ids(v.intersection or {})
    return (f"{'PASS' if v.ok else 'FAIL'} binding ({v.mode}, {v.extensions} extensions): "
            f"common pairs of p{{{ids}}}, size {len(v.intersection or {})}")


def _pairs_text(S):
    return "{" + ",".join(str(v) for _, v in sorted(S.items())) + "}"


@assessor("f1-corner")
def assess_f1(traces):
    rep = Report("f1-corner")
    params = traces[0].meta.get("params", {})
    fork_at = traces[0].meta.get("fork_at", 0)
    base = traces[0].events[:fork_at]
    rep.checks.append(Check("extensions share the prefix", all(t.events[:fork_at] == base for t in traces),
                            f"{len(traces)} extensions forked after event {fork_at}"))
    first = sorted(p for p, d in traces[0].decisions.items() if d.event_index < fork_at and p not in traces[0].faulty)
    rep.lines.append("returned in the prefix: " + ", ".join(
        f"p{p + 1} {_pairs_text(traces[0].decisions[p].value)}" for p in first))
    outs = [t.correct_decisions() for t in traces]
    if not params.get("binding"):
        for i, o in enumerate(outs):
            rep.lines.append(f"extension {i + 1}: " + ", ".join(f"p{p + 1} {_pairs_text(S)}" for p, S in sorted(o.items())))
        want = [{0: {1, 2, 3, 4}, 1: {1, 2, 3}}, {0: {1, 2, 3, 4}, 1: {2, 3, 4}}]
        got = [{p: set(S.values()) for p, S in o.items()} for o in outs]
        rep.checks.append(Check("phase-2 outputs match the counterexample", got == want,
                                "; ".join(str(sorted(map(sorted, g.values()))) for g in got)))
        verdict = check_binding(outs, 4, 1, "gather", "constructed")
        rep.lines.append(_binding_line(verdict))
        values = sorted(verdict.intersection.values()) if verdict.intersection is not None else None
        rep.checks.append(Check("binding refuted with intersection {2,3}",
                                not verdict.ok and values == [2, 3], f"intersection values {values}"))
    else:
        verdict = check_binding(outs, 4, 1, "gather", "sampled")
        rep.lines.append(_binding_line(verdict))
        rep.checks.append(Check("at least 20 extensions", len(traces) >= 20, f"{len(traces)}"))
        core = verdict.intersection or {}
        rep.checks.append(Check("binding common core across extensions", verdict.ok,
                                f"common ids {{{_ids(core)}}} of size {len(core)} (need 3)"))
        bad = [i + 1 for i, t in enumerate(traces) if not all(c.ok for c in check_gather(t))]
        rep.checks.append(Check("every extension satisfies gather", not bad, f"failing extensions {bad}" if bad else ""))
    return rep


# -- running time ------------------------------------------------------------------

RB_TCOR = 3
RB_TREL = 2


def gather_bound(binding) -> int:
    return RB_TCOR + (3 if binding else 2) * max(1, RB_TREL)


def _plan(binding):
    return binding_plan() if binding else nonbinding_plan()


def gap_simulation(binding, machine, label):
    """Worst-case unit-delay schedule of the given gather mode; ``machine``
    builds the protocol of process p from (n, f, p, input)."""
    plan = _plan(binding)
    n, f = plan.n, plan.f
    faulty = [g.byz for g in plan.gaps]
    inputs = {p: ("v" if p % 2 else "w") for p in range(n)}
    return Simulation(n, f, faulty, inputs, lambda p: machine(n, f, p, inputs[p]),
                      adversary=GapAdversary(plan), schedule=Timed(GapPolicy(plan)), label=label)


def _fuzz_gather_sim(n, f, binding, seed, machine, label, tag=RB_TAG):
    inputs = {p: p % 3 for p in range(n)}
    faulty = list(range(n - f, n))
    return Simulation(n, f, faulty, inputs, lambda p: machine(n, f, p, inputs[p]),
                      adversary=RandomGatherAdversary(seed, tag=tag), schedule=Fuzzed(seed), label=label)


def _fmt(x):
    return str(x) if not isinstance(x, Exception) else f"undefined ({x})"


@scenario("rb-timing", "reliable broadcast: correct-sender accept time and relay gap", max_events=100_000)
def build_rb_timing(max_events):
    n, f = 4, 1
    a = Simulation(n, f, {3}, {0: "v"}, lambda p: RbMachine(n, f, p, 0, "v" if p == 0 else None),
                   schedule=Timed(unit_delay), label="correct sender")
    a.run_until(all_correct_decided, max_events=max_events)
    # a late broadcast needs n = 3f + 1 with f + 1 helpers besides the victim
    n, f = 7, 2
    plan = GapPlan(n=n, f=f, slow=None, gaps=[LateBroadcast(6, "b", 0, Fraction(1), (1, 2, 3))])
    b = Simulation(n, f, {5, 6}, {}, lambda p: RbMachine(n, f, p, 6),
                   adversary=GapAdversary(plan, tag="rb"), schedule=Timed(GapPolicy(plan)),
                   label="faulty sender")
    b.run_until(all_correct_decided, max_events=max_events)
    return [a.trace, b.trace]


def relay_gap(trace):
    """(last - first) correct accept time in units of the largest delay."""
    dec = [trace.decisions[p] for p in trace.correct if p in trace.decisions]
    if len(dec) < len(trace.correct):
        raise UndefinedTime(f"undecided correct processes {trace.undecided()}")
    d = max_correct_delay(trace, max(x.event_index for x in dec))
    if not d:
        raise UndefinedTime("no correct-to-correct delivery")
    return (max(x.time for x in dec) - min(x.time for x in dec)) / d


@assessor("rb-timing")
def assess_rb_timing(traces):
    a, b = traces
    rep = Report("rb-timing")
    ta = _time(a)
    try:
        gap = relay_gap(b)
    except UndefinedTime as exc:
        gap = exc
    rep.lines.append(f"correct sender: normalized time {_fmt(ta)}")
    rep.lines.append("faulty sender: accepts at " + ", ".join(
        f"p{p + 1}@{wire.fmt_time(b.decisions[p].time)}" for p in sorted(b.correct_decisions())))
    rep.checks.append(Check("correct-sender accept at normalized time 3", ta == RB_TCOR, _fmt(ta)))
    rep.checks.append(Check("relay gap at most 2 with a faulty sender",
                            not isinstance(gap, Exception) and gap <= RB_TREL, _fmt(gap)))
    rep.checks += check_rb(a, 0, "v")
    rep.checks += check_rb(b, 6)
    return rep


@scenario("gather-timing", "gather running time: exact worst case on unit delays, or fuzzed",
          binding=False, delays="unit", n=4, f=1, seed=0, max_events=500_000)
def build_gather_timing(binding, delays, n, f, seed, max_events):
    mk = lambda n_, f_, p, v: GatherMachine(n_, f_, p, v, binding=binding)
    if delays == "unit":
        sim = gap_simulation(binding, mk, "gather worst case")
    elif delays == "fuzz":
        sim = _fuzz_gather_sim(n, f, binding, seed, mk, "gather fuzzed")
    else:
        raise ScenarioError(f"unknown delay model {delays!r} (use unit or fuzz)")
    return [sim.run_until(all_correct_decided, max_events=max_events)]


@assessor("gather-timing")
def assess_gather_timing(traces):
    (t,) = traces
    params = t.meta.get("params", {})
    binding = bool(params.get("binding"))
    bound = gather_bound(binding)
    rep = Report("gather-timing")
    nt = _time(t)
    rep.lines.append(f"{'binding' if binding else 'non-binding'} gather, n={t.n}, f={t.f}: normalized time {_fmt(nt)}, bound {bound}")
    ok = not isinstance(nt, Exception) and nt <= bound
    rep.checks.append(Check(f"running time within {bound}", ok, _fmt(nt)))
    if params.get("delays") == "unit":
        rep.checks.append(Check(f"worst case reaches {bound}", nt == bound, _fmt(nt)))
    rep.checks += check_gather(t)
    return rep


CC_RS = (1, 2, 4, 8)


@scenario("cc-timing", "connected consensus running time for R in 1, 2, 4, 8",
          binding=False, R=None, delays="unit", n=4, f=1, seed=0, max_events=1_000_000)
def build_cc_timing(binding, R, delays, n, f, seed, max_events):
    traces = []
    for r in ([R] if R else CC_RS):
        mk = lambda n_, f_, p, v, r=r: ConnectedConsensus(n_, f_, p, v, R=r, binding=binding)
        if delays == "unit":
            sim = gap_simulation(binding, mk, f"cc R={r}")
        elif delays == "fuzz":
            sim = _fuzz_gather_sim(n, f, binding, seed, mk, f"cc R={r}")
        else:
            raise ScenarioError(f"unknown delay model {delays!r} (use unit or fuzz)")
        sim.run_until(all_correct_decided, max_events=max_events)
        sim.trace.meta = dict(sim.trace.meta, R=r)
        traces.append(sim.trace)
    return traces


@assessor("cc-timing")
def assess_cc_timing(traces):
    rep = Report("cc-timing")
    for t in traces:
        params = t.meta.get("params", {})
        binding = bool(params.get("binding"))
        R = t.meta["R"]
        y = gather_bound(binding)
        bound = y + 4 * iterations_for(R)
        nt = _time(t)
        rep.lines.append(f"R={R}: normalized time {_fmt(nt)}, bound {bound}")
        ok = not isinstance(nt, Exception) and nt <= bound
        rep.checks.append(Check(f"R={R} running time within {bound}", ok, _fmt(nt)))
        if R == 1 and params.get("delays") == "unit":
            rep.checks.append(Check(f"R=1 worst case reaches {y}", nt == y, _fmt(nt)))
        rep.checks += [Check(f"R={R} {c.name}", c.ok, c.detail) for c in check_cc(t, R)]
    return rep


# -- lower-bound constructions ---------------------------------------------------------


def _algorithm(omega, rounds):
    if omega not in OMEGAS:
        raise ScenarioError(f"unknown decision function {omega!r}; known: {', '.join(sorted(OMEGAS))}")
    return CanonicalRoundAlgorithm(OMEGAS[omega], rounds, omega)


def _build_triple(f, K, omega, rounds, closed):
    if f < 1 or K < 1:
        raise ScenarioError("need f >= 1 and K >= 1")
    triple = construct_triple(_algorithm(omega, rounds or K), f, K, closed)
    for i, t in enumerate(triple.traces):
        t.meta = dict(t.meta, K=K, closed=closed)
    return triple.traces


@scenario("triple", "three executions against a bounded canonical-round algorithm",
          f=1, K=3, omega="majority", rounds=None)
def build_triple(f, K, omega, rounds):
    return _build_triple(f, K, omega, rounds, False)


@scenario("triple-closed", "the communication-closed construction, inspected up to round K",
          f=1, K=10, omega="echo-majority", rounds=2)
def build_triple_closed(f, K, omega, rounds):
    return _build_triple(f, K, omega, rounds, True)


def _assess_triple(traces, name):
    K = traces[0].meta["K"]
    closed = traces[0].meta["closed"]
    triple = triple_from_traces(traces, K, closed)
    rep = Report(name)
    a0, a1, a2 = traces
    G = triple.groups
    rep.lines.append("groups " + " ".join(f"{g}={{{_ids(G[g], False)}}}" for g in "ABCDE")
                     + f"; faulty A in α₀, C in α₁, E in α₂; {K} rounds inspected")
    claims = [claims_hold(triple, r) for r in range(K + 1)]
    for j, text in ((0, "α₀ and α₂ indistinguishable to B,C"), (1, "α₁ and α₂ indistinguishable to A,D")):
        bad = [r for r, c in enumerate(claims) if not c[j]]
        rep.checks.append(Check(f"{text} at every round", not bad, f"failing prefixes {bad}" if bad else ""))
    rep.checks.append(Check("faulty messages mirror the paired execution", mirroring_sound(triple)))
    BC = triple.group("B", "C")
    rep.lines.append(f"α₁ vs α₂ on B,C: {'indistinguishable' if indistinguishable(a1, a2, BC) else 'distinguishable'}")
    split = _equivocation(a2, triple)
    rep.lines.append(f"faulty E sends different messages to A,D and B,C in α₂: {split}")
    if closed:
        for i, t in enumerate(traces):
            late = sorted({e.sender for e in t.events if e.discarded})
            rep.lines.append(f"α{'₀₁₂'[i]}: discarded late messages from {{{_ids(late, False)}}}")
    v = check_violation(triple)
    rep.lines += v.lines
    rep.lines.append(f"verdict: {v.verdict}")
    rep.checks.append(Check("construction witnesses the impossibility", v.ok, v.verdict))
    return rep


def _equivocation(trace, triple):
    AD, BC = set(triple.group("A", "D")), set(triple.group("B", "C"))
    differs = False
    for p in triple.groups["E"]:
        to_ad = {e.payload for e in trace.message_log if e.sender == p and e.recipient in AD}
        to_bc = {e.payload for e in trace.message_log if e.sender == p and e.recipient in BC}
        differs = differs or (bool(to_ad) and to_ad != to_bc)
    return differs


@assessor("triple")
def assess_triple(traces):
    return _assess_triple(traces, "triple")


@assessor("triple-closed")
def assess_triple_closed(traces):
    return _assess_triple(traces, "triple-closed")


# -- crusader agreement via reliable broadcast -----------------------------------------


@scenario("crusader-rb", "crusader agreement from reliable broadcast under a random adversary",
          n=5, f=1, seed=0, inputs="mixed", max_events=200_000)
def build_crusader(n, f, seed, inputs, max_events):
    if inputs == "same":
        inp = {p: "v" for p in range(n)}
    elif inputs == "mixed":
        inp = {p: ("v" if p % 2 else "w") for p in range(n)}
    else:
        raise ScenarioError(f"inputs must be same or mixed, got {inputs!r}")
    sim = Simulation(n, f, range(n - f, n), inp, lambda p: CrusaderRB(n, f, p, inp[p]),
                     adversary=RandomGatherAdversary(seed, values=("v", "w"), tag="CA"),
                     schedule=Fuzzed(seed), label="crusader-rb")
    return [sim.run_until(all_correct_decided, max_events=max_events)]


@assessor("crusader-rb")
def assess_crusader(traces):
    (t,) = traces
    rep = Report("crusader-rb")
    rep.lines.append("decisions: " + ", ".join(f"p{p + 1}={v!r}" for p, v in sorted(t.correct_decisions().items())))
    rep.checks += check_crusader(t)
    return rep
