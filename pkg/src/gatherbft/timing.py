"""Worst-case schedules for the running-time bounds.

All correct-to-correct delays are at most 1, so the largest observed delay
is 1 and normalized time equals absolute time.  The tool that stretches
gather is the *late Byzantine broadcast*: a faulty sender ``b`` makes one
correct process ``a`` accept its pair at time ``t`` while everybody else
accepts it at ``t + 2``.

* ``b``'s INIT reaches a helper set ``H`` of ``f + 1`` correct processes at
  ``t - 1``; their echoes land at ``t``, together with ``f`` faulty echoes.
* ``H`` now has ``2f + 1`` echoes and sends ready at ``t``; those readys
  reach ``a`` instantly and, together with ``f`` faulty readys, make ``a``
  accept at ``t``.
* Everyone else first sees ``f + 2`` readys at ``t + 1`` and accepts at
  ``t + 2``.

This needs ``n = 3f + 1``.  Chaining ``f`` such broadcasts, each feeding a
phase message that contains the fresh pair to the next victim, delays a slow
process ``L`` by two time units per phase beyond the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import wire
from .adversary import Watcher
from .gather import RB_TAG, parse_phase, phase_message
from .rb import ECHO, INIT, READY, parse_rb, rb_message


@dataclass
class LateBroadcast:
    byz: int          # faulty sender of the instance
    value: object
    victim: int       # first (and only early) acceptor
    t: Fraction       # the victim's acceptance time
    helpers: tuple    # f + 1 correct processes, excluding the victim and L


@dataclass
class Injection:
    """Faulty phase message for ``recipient``: its own pairs at ``phase``
    plus the pair of ``pair_of``."""
    recipient: int
    phase: int
    pair_of: int


@dataclass
class GapPlan:
    n: int
    f: int
    slow: int
    gaps: list
    injections: list = field(default_factory=list)
    # recipients that get no mirrored phase message in a phase
    no_mirror: dict = field(default_factory=dict)
    # deliveries to a recipient of these instances are deferred within a tick
    deferred: dict = field(default_factory=dict)


def nonbinding_plan() -> GapPlan:
    # n = 7, f = 2: correct 0..4, slow process 4, faulty 5 and 6
    return GapPlan(
        n=7, f=2, slow=4,
        gaps=[
            LateBroadcast(5, "b5", 0, Fraction(3), (1, 2, 3)),
            LateBroadcast(6, "b6", 1, Fraction(5), (0, 2, 3)),
        ],
        injections=[Injection(1, 2, 6)],
        no_mirror={2: {1}},
        deferred={1: {5}},
    )


def binding_plan() -> GapPlan:
    # n = 10, f = 3: correct 0..6, slow process 6, faulty 7, 8, 9
    return GapPlan(
        n=10, f=3, slow=6,
        gaps=[
            LateBroadcast(7, "b7", 0, Fraction(3), (2, 3, 4, 5)),
            LateBroadcast(8, "b8", 1, Fraction(5), (0, 3, 4, 5)),
            LateBroadcast(9, "b9", 2, Fraction(7), (0, 3, 4, 5)),
        ],
        injections=[Injection(1, 2, 8), Injection(2, 3, 9)],
        no_mirror={2: {1}, 3: {2}},
        deferred={1: {7}, 2: {8}},
    )


def _rb(obj):
    return parse_rb(obj)


class GapPolicy:
    """Delay 1 everywhere except the instant readys of late broadcasts, with
    tie-breaking priorities that make each victim process the late pair before
    its competitors."""

    def __init__(self, plan: GapPlan):
        self.plan = plan
        self.zero = {g.byz: g.victim for g in plan.gaps}
        self.helpers = {g.byz: set(g.helpers) for g in plan.gaps}
        self.first_victim = plan.gaps[0].victim
        self.byz = {g.byz for g in plan.gaps}

    def __call__(self, env, sim):
        rb = _rb(wire.decode(env.payload))
        if rb is None:
            return Fraction(1)
        s, _tag, phase, _value = rb
        if phase == READY:
            if self.zero.get(s) == env.recipient:
                return (Fraction(0), 0)
            if env.recipient in self.plan.deferred and s in self.plan.deferred[env.recipient]:
                return (Fraction(1), 1)
            # the first victim sees the late pair ahead of the honest ones
            if (env.recipient == self.first_victim and s not in self.byz
                    and env.sender not in self.helpers[self.plan.gaps[0].byz]):
                return (Fraction(1), 1)
        return Fraction(1)


class GapAdversary(Watcher):
    """Faulty side of a :class:`GapPlan`.

    Faulty processes never send anything to the slow process.  Toward the
    others they run the late broadcasts, send the planned injections, and
    otherwise mirror each correct phase message back to its sender.
    """

    def __init__(self, plan: GapPlan, tag=RB_TAG):
        super().__init__()
        self.plan = plan
        self.tag = tag
        self.pending = []
        self.pairs = {}
        for g in plan.gaps:
            self.pairs[g.byz] = g.value
        self._mirrored = set()

    def start(self, sim):
        faulty = sorted(sim.faulty)
        for g in self.plan.gaps:
            for h in g.helpers:
                self.pending.append((g.t - 1, g.byz, h, rb_message(g.byz, self.tag, INIT, g.value)))
                for b in faulty:
                    self.pending.append((g.t, b, h, rb_message(g.byz, self.tag, ECHO, g.value)))
            for b in faulty:
                self.pending.append((g.t, b, g.victim, rb_message(g.byz, self.tag, READY, g.value)))
        self.pending.sort(key=lambda x: x[0])
        self._flush(sim)

    def _flush(self, sim):
        keep = []
        for item in self.pending:
            at, b, r, payload = item
            if sim.now >= at - 1:
                sim.emit(b, r, payload, at=max(at, sim.now))
            else:
                keep.append(item)
        self.pending = keep

    def on_event(self, sim, event):
        self._flush(sim)

    def on_send(self, sim, env):
        if env.recipient != env.sender or env.sender == self.plan.slow:
            return
        ph = parse_phase(wire.decode(env.payload), sim.n)
        if ph is None:
            return
        phase, pairs = ph
        i = env.sender
        for inj in self.plan.injections:
            if inj.recipient == i and inj.phase == phase:
                forged = dict(pairs)
                forged[inj.pair_of] = self.pairs[inj.pair_of]
                for b in sorted(sim.faulty):
                    sim.emit(b, i, phase_message(phase, forged), delay=Fraction(1))
                return
        if i in self.plan.no_mirror.get(phase, ()):
            return
        for b in sorted(sim.faulty):
            sim.emit(b, i, env.payload, delay=Fraction(1))
