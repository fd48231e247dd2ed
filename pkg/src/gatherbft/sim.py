"""Deterministic discrete-event simulator for the asynchronous Byzantine model.

``n`` processes are state machines driven by two kinds of events: a single
WakeUp and the delivery of a message.  Links are reliable and FIFO.  Up to ``f``
processes are faulty; they run no machine and are instead driven by an
omniscient adversary that may inject arbitrary payloads on their behalf.

Three schedule modes decide which event happens next:

* :class:`Scripted` -- an explicit list of directives (replays, constructions);
* :class:`Timed` -- a delay policy assigns every envelope a delivery time;
* :class:`Fuzzed` -- a :class:`Timed` schedule whose delays come from a seeded RNG.

Times are exact :class:`~fractions.Fraction` values.
"""

from __future__ import annotations

import copy
import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional

WAKEUP = "wakeup"
DELIVER = "deliver"

# stand-in for the payload of a delivery the recipient discarded unread
DISCARDED = "<discarded>"


class ScriptError(Exception):
    """A directive that the model forbids (FIFO violation, unknown envelope...)."""

    def __init__(self, message, directive=None):
        super().__init__(message if directive is None else f"{message}: {directive!r}")
        self.directive = directive


class UndefinedTime(ValueError):
    pass


@dataclass
class Envelope:
    sender: int
    recipient: int
    payload: bytes
    link_seq: int
    send_time: Fraction
    # for adversary-injected envelopes: number of trace events when emitted
    emitted_after: Optional[int] = None

    @property
    def key(self):
        return (self.sender, self.recipient, self.link_seq)


@dataclass(frozen=True)
class Event:
    kind: str
    target: int
    time: Fraction
    sender: Optional[int] = None
    link_seq: Optional[int] = None
    payload: Optional[bytes] = None
    discarded: bool = False


@dataclass(frozen=True)
class Decision:
    value: object
    time: Fraction
    event_index: int


@dataclass
class ExecutionTrace:
    n: int
    f: int
    faulty: frozenset
    inputs: dict
    events: list = field(default_factory=list)
    decisions: dict = field(default_factory=dict)
    message_log: list = field(default_factory=list)
    stop_reason: Optional[str] = None
    anomalies: list = field(default_factory=list)
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def correct(self) -> list[int]:
        return [p for p in range(self.n) if p not in self.faulty]

    def correct_decisions(self) -> dict:
        return {p: d.value for p, d in self.decisions.items() if p not in self.faulty}

    def undecided(self) -> list[int]:
        return [p for p in self.correct if p not in self.decisions]

    def envelope(self, sender, recipient, link_seq) -> Envelope:
        return self._envelope_index()[(sender, recipient, link_seq)]

    def _envelope_index(self):
        idx = self.__dict__.get("_env_idx")
        if idx is None or len(idx) != len(self.message_log):
            idx = {e.key: e for e in self.message_log}
            self.__dict__["_env_idx"] = idx
        return idx

    def sent_by(self, sender) -> list[Envelope]:
        return [e for e in self.message_log if e.sender == sender]


# -- directives --------------------------------------------------------------


@dataclass(frozen=True)
class WakeUp:
    target: int
    time: Fraction = Fraction(0)


@dataclass(frozen=True)
class Deliver:
    sender: int
    recipient: int
    link_seq: int
    time: Optional[Fraction] = None


@dataclass(frozen=True)
class Emit:
    sender: int
    recipient: int
    payload: bytes
    time: Optional[Fraction] = None


# -- schedules ---------------------------------------------------------------


class Scripted:
    """Run exactly the given directives, in order."""

    def __init__(self, directives: Iterable = ()):
        self.directives = list(directives)
        self.position = 0

    def next(self):
        if self.position >= len(self.directives):
            return None
        d = self.directives[self.position]
        self.position += 1
        return d


class Timed:
    """Deliver envelopes at times chosen by ``policy(envelope, sim)``.

    The policy returns a delay, a ``(delay, priority)`` pair, or ``None`` to
    hold the envelope (and, by FIFO, everything queued behind it on the link)
    until the schedule is replaced.  Ties in time are broken by priority, then
    by planning order.  Policies must be stateless functions or deep-copyable
    objects so that :meth:`Simulation.fork` stays independent.
    """

    def __init__(self, policy: Callable, wake_times: Optional[dict] = None):
        self.policy = policy
        self.wake_times = wake_times

    def plan(self, env, sim):
        return self.policy(env, sim)


class Fuzzed(Timed):
    """Seeded random delays drawn from a finite set (default {1/2, 1})."""

    def __init__(self, seed: int, delays=(Fraction(1, 2), Fraction(1)), wake_times=None):
        self.seed = seed
        self.delays = tuple(Fraction(d) for d in delays)
        self.rng = random.Random(seed)
        super().__init__(None, wake_times)

    def plan(self, env, sim):
        return self.rng.choice(self.delays)


def unit_delay(env, sim):
    return Fraction(1)


# -- adversary ---------------------------------------------------------------


class Adversary:
    """Omniscient, adaptive controller of the faulty processes.

    ``start`` runs once after construction; ``observe`` runs after every event
    (including deliveries to faulty processes).  Both may call
    :meth:`Simulation.emit`.  The default adversary is silent.
    """

    def start(self, sim: "Simulation") -> None:
        pass

    def observe(self, sim: "Simulation", event: Event) -> None:
        pass


SILENT = Adversary()


# -- simulation --------------------------------------------------------------


def to_all(n: int, payload: bytes) -> list[tuple[int, bytes]]:
    return [(j, payload) for j in range(n)]


class Simulation:
    def __init__(
        self,
        n: int,
        f: int,
        faulty: Iterable[int],
        inputs: dict,
        machines,
        adversary: Optional[Adversary] = None,
        schedule=None,
        label: str = "",
    ):
        faulty = list(faulty)
        if len(set(faulty)) != len(faulty):
            raise ValueError(f"duplicate faulty ids {faulty}")
        if len(faulty) > f:
            raise ValueError(f"{len(faulty)} faulty processes exceed f={f}")
        for p in faulty:
            if not 0 <= p < n:
                raise ValueError(f"process id {p} outside [0, {n})")
        for p in inputs:
            if not 0 <= p < n:
                raise ValueError(f"process id {p} outside [0, {n})")
        self.n = n
        self.f = f
        self.faulty = frozenset(faulty)
        factory = machines.__getitem__ if isinstance(machines, dict) else machines
        self.machines = {p: factory(p) for p in range(n) if p not in self.faulty}
        self.adversary = adversary if adversary is not None else SILENT
        self.schedule = schedule if schedule is not None else Timed(unit_delay)
        self.trace = ExecutionTrace(
            n=n,
            f=f,
            faulty=self.faulty,
            inputs={p: inputs.get(p) for p in range(n)},
            label=label,
        )
        self.now = Fraction(0)
        self.links: dict[tuple[int, int], deque] = {}
        self._next_seq: dict[tuple[int, int], int] = {}
        self.woken: set[int] = set()
        self._heap: list = []
        self._counter = 0
        self._last_key: dict = {}
        self._held: set = set()
        self._pending_wakes: dict[int, Fraction] = {}
        self._anomaly_counts: dict[int, int] = {}
        if isinstance(self.schedule, Timed):
            wake = self.schedule.wake_times
            if wake is None:
                wake = {p: Fraction(0) for p in self.machines}
            for p, t in wake.items():
                self._pending_wakes[p] = Fraction(t)
            self._replan()
        self.adversary.start(self)

    # -- introspection -------------------------------------------------------

    @property
    def correct(self) -> list[int]:
        return [p for p in range(self.n) if p not in self.faulty]

    def in_transit(self) -> list[Envelope]:
        return [e for q in self.links.values() for e in q]

    def link_head(self, sender, recipient) -> Optional[Envelope]:
        q = self.links.get((sender, recipient))
        return q[0] if q else None

    # -- scheduling ------------------------------------------------------------

    def _push(self, t, prio, kind, obj):
        self._counter += 1
        heapq.heappush(self._heap, (t, prio, self._counter, kind, obj))

    def _plan(self, env: Envelope, at=None, delay=None, prio=0):
        link = (env.sender, env.recipient)
        if link in self._held:
            return
        if at is None and delay is None:
            res = self.schedule.plan(env, self)
            if res is None:
                self._held.add(link)
                return
            if isinstance(res, tuple):
                delay, prio = res
            else:
                delay = res
        if at is not None:
            t = Fraction(at)
        else:
            t = env.send_time + Fraction(delay)
        if t < self.now:
            t = self.now
        key = (t, prio)
        last = self._last_key.get(link)
        if last is not None and key < last:
            key = last
        self._last_key[link] = key
        self._push(key[0], key[1], DELIVER, env)

    def _replan(self):
        self._heap = []
        self._last_key = {}
        self._held = set()
        for p, t in sorted(self._pending_wakes.items()):
            self._push(max(t, self.now), -1, WAKEUP, p)
        for link in sorted(self.links):
            for env in self.links[link]:
                self._plan(env)

    def reschedule(self, schedule) -> None:
        """Replace the schedule; in-transit envelopes are re-planned under it."""
        self.schedule = schedule
        if isinstance(schedule, Timed):
            self._replan()
        else:
            self._heap = []

    # -- primitive actions -------------------------------------------------------

    def apply(self, directive) -> Event:
        if isinstance(directive, WakeUp):
            return self._wakeup(directive.target, directive.time, directive)
        if isinstance(directive, Deliver):
            return self._deliver(directive.sender, directive.recipient, directive.link_seq,
                                 directive.time, directive)
        if isinstance(directive, Emit):
            if directive.time is not None:
                self._advance(Fraction(directive.time), directive)
            self.emit(directive.sender, directive.recipient, directive.payload)
            return None
        raise ScriptError("unknown directive", directive)

    def _advance(self, t, directive=None):
        if t is None:
            return
        t = Fraction(t)
        if t < self.now:
            raise ScriptError(f"time {t} earlier than current time {self.now}", directive)
        self.now = t

    def _wakeup(self, p, t, directive=None) -> Event:
        if not 0 <= p < self.n:
            raise ScriptError("nonexistent process", directive)
        self._advance(t, directive)
        self._pending_wakes.pop(p, None)
        if p in self.faulty:
            ev = Event(WAKEUP, p, self.now)
            self._record(ev)
            return ev
        if p in self.woken:
            raise ScriptError("correct process woken twice", directive)
        self.woken.add(p)
        ev = Event(WAKEUP, p, self.now)
        sends = self.machines[p].wakeup()
        self._record(ev)
        self._dispatch(p, sends)
        self._after(p, ev)
        return ev

    def _deliver(self, s, r, seq, t, directive=None) -> Event:
        q = self.links.get((s, r))
        if not q or q[0].link_seq != seq:
            if q and any(e.link_seq == seq for e in q):
                raise ScriptError(f"FIFO violation on link {s}->{r}", directive)
            raise ScriptError("nonexistent or already-delivered envelope", directive)
        self._advance(t, directive)
        if r in self.machines and r not in self.woken:
            # a message receipt may itself trigger the WakeUp
            self._wakeup(r, self.now)
        env = q.popleft()
        if r in self.faulty:
            ev = Event(DELIVER, r, self.now, s, seq, env.payload)
            self._record(ev)
            self.adversary.observe(self, ev)
            return ev
        m = self.machines[r]
        sends = m.receive(s, env.payload)
        ev = Event(DELIVER, r, self.now, s, seq, env.payload,
                   bool(getattr(m, "last_discarded", False)))
        self._record(ev)
        self._dispatch(r, sends)
        self._after(r, ev)
        return ev

    def _new_envelope(self, s, r, payload) -> Envelope:
        if not 0 <= r < self.n:
            raise ValueError(f"recipient {r} outside [0, {self.n})")
        if not isinstance(payload, (bytes, bytearray)):
            raise TypeError("payloads are byte strings")
        link = (s, r)
        seq = self._next_seq.get(link, 0) + 1
        self._next_seq[link] = seq
        env = Envelope(s, r, bytes(payload), seq, self.now)
        self.links.setdefault(link, deque()).append(env)
        self.trace.message_log.append(env)
        return env

    def _dispatch(self, sender, sends):
        for r, payload in sends:
            env = self._new_envelope(sender, r, payload)
            if isinstance(self.schedule, Timed):
                self._plan(env)

    def emit(self, sender, recipient, payload, at=None, delay=None, prio=0) -> Envelope:
        """Inject a message from a faulty process (adversary use only)."""
        if sender not in self.faulty:
            raise ValueError(f"only faulty processes may emit; {sender} is correct")
        env = self._new_envelope(sender, recipient, payload)
        env.emitted_after = len(self.trace.events)
        if isinstance(self.schedule, Timed):
            if at is not None and Fraction(at) < self.now:
                raise ValueError(f"cannot schedule delivery in the past ({at} < {self.now})")
            self._plan(env, at=at, delay=delay, prio=prio)
        return env

    def _record(self, ev):
        self.trace.events.append(ev)

    def _after(self, p, ev):
        m = self.machines[p]
        found = getattr(m, "anomalies", None)
        if found:
            seen = self._anomaly_counts.get(p, 0)
            for a in found[seen:]:
                self.trace.anomalies.append(f"process {p}: {a}")
            self._anomaly_counts[p] = len(found)
        if getattr(m, "decided", False):
            prev = self.trace.decisions.get(p)
            if prev is None:
                self.trace.decisions[p] = Decision(m.decision, ev.time, len(self.trace.events) - 1)
            elif prev.value != m.decision:
                self.trace.anomalies.append(
                    f"process {p} changed decision {prev.value!r} -> {m.decision!r}")
        self.adversary.observe(self, ev)

    # -- driving -----------------------------------------------------------------

    def step(self) -> Optional[Event]:
        """Apply exactly one event; ``None`` once the schedule is exhausted."""
        if isinstance(self.schedule, Scripted):
            while True:
                d = self.schedule.next()
                if d is None:
                    return None
                ev = self.apply(d)
                if ev is not None:
                    return ev
        while self._heap:
            t, _prio, _c, kind, obj = heapq.heappop(self._heap)
            if kind == WAKEUP:
                if obj in self.woken:
                    continue
                return self._wakeup(obj, t)
            return self._deliver(obj.sender, obj.recipient, obj.link_seq, t)
        return None

    def run_until(self, predicate=None, max_events: int = 1_000_000) -> ExecutionTrace:
        """Step until ``predicate(trace)`` holds, the schedule runs dry, or
        ``max_events`` events have been applied.  The reason lands in
        ``trace.stop_reason``: "predicate", "quiescent", "blocked" or
        "max_events"."""
        if max_events <= 0:
            raise ValueError("max_events must be positive")
        if predicate is not None and predicate(self.trace):
            self.trace.stop_reason = "predicate"
            return self.trace
        for _ in range(max_events):
            ev = self.step()
            if ev is None:
                stuck = [e for e in self.in_transit() if e.recipient not in self.faulty]
                self.trace.stop_reason = "blocked" if stuck else "quiescent"
                return self.trace
            if predicate is not None and predicate(self.trace):
                self.trace.stop_reason = "predicate"
                return self.trace
        self.trace.stop_reason = "max_events"
        return self.trace

    def fork(self) -> "Simulation":
        return copy.deepcopy(self)


def all_correct_decided(trace: ExecutionTrace) -> bool:
    return all(p in trace.decisions for p in trace.correct)


def any_correct_decided(trace: ExecutionTrace) -> bool:
    return any(p in trace.decisions for p in trace.correct)


# -- analysis ------------------------------------------------------------------


def normalized_time(trace: ExecutionTrace) -> Fraction:
    """Last correct decision minus latest correct WakeUp, in units of the
    largest correct-to-correct delay observed in the prefix ending at that
    decision."""
    correct = set(trace.correct)
    decided = [d for p, d in trace.decisions.items() if p in correct]
    if not decided:
        raise UndefinedTime("no correct process decided")
    missing = sorted(correct - set(trace.decisions))
    if missing:
        raise UndefinedTime(f"undecided correct processes {missing}")
    last = max(d.event_index for d in decided)
    largest = max_correct_delay(trace, last)
    if not largest:
        raise UndefinedTime("no correct-to-correct message with positive delay in the prefix")
    wake = max(ev.time for ev in trace.events[: last + 1] if ev.kind == WAKEUP and ev.target in correct)
    return (trace.events[last].time - wake) / largest


def max_correct_delay(trace: ExecutionTrace, last: Optional[int] = None) -> Optional[Fraction]:
    """Largest correct-to-correct delivery delay among events ``0..last``."""
    correct = set(trace.correct)
    events = trace.events if last is None else trace.events[: last + 1]
    largest = None
    for ev in events:
        if ev.kind == DELIVER and ev.target in correct and ev.sender in correct:
            delay = ev.time - trace.envelope(ev.sender, ev.target, ev.link_seq).send_time
            largest = delay if largest is None else max(largest, delay)
    return largest


def local_view(trace: ExecutionTrace, p: int) -> list[tuple]:
    return [
        (ev.kind, ev.sender, DISCARDED if ev.discarded else ev.payload)
        for ev in trace.events
        if ev.target == p
    ]


def indistinguishable(trace_a: ExecutionTrace, trace_b: ExecutionTrace, group) -> bool:
    """Same input and same ordered (kind, sender, payload) sequence for every
    process of ``group``; absolute times are ignored, and a delivery the
    recipient discarded unread compares only by kind and sender."""
    for p in group:
        if trace_a.inputs.get(p) != trace_b.inputs.get(p):
            return False
        if local_view(trace_a, p) != local_view(trace_b, p):
            return False
    return True
