"""Adversary building blocks.

Adversaries see the whole simulation.  Most of the ones here react to the
envelopes correct processes put on the wire, which :class:`Watcher` exposes
incrementally.
"""

from __future__ import annotations

import random
from fractions import Fraction

from . import wire
from .gather import RB_TAG, parse_phase, phase_message
from .rb import ECHO, INIT, READY, parse_rb, rb_message
from .sim import Adversary


class Watcher(Adversary):
    """Calls :meth:`on_send` for every envelope a correct process sends."""

    def __init__(self):
        self._cursor = 0

    def observe(self, sim, event):
        log = sim.trace.message_log
        while self._cursor < len(log):
            env = log[self._cursor]
            self._cursor += 1
            if env.sender not in sim.faulty:
                self.on_send(sim, env)
        self.on_event(sim, event)

    def on_send(self, sim, env):
        pass

    def on_event(self, sim, event):
        pass


class MirrorPhases(Watcher):
    """Faulty processes take part honestly in every broadcast instance of
    ``tag`` and answer each correct phase message with a copy of it, so the
    recipient approves it at once.  ``inputs`` gives the faulty processes'
    broadcast values."""

    def __init__(self, inputs, tag=RB_TAG, delay=Fraction(1)):
        super().__init__()
        self.inputs = inputs
        self.tag = tag
        self.delay = delay
        self._done = set()

    def start(self, sim):
        for b in sorted(sim.faulty):
            for i in sim.correct:
                sim.emit(b, i, rb_message(b, self.tag, INIT, self.inputs[b]), delay=self.delay)

    def on_send(self, sim, env):
        obj = wire.decode(env.payload)
        rb = parse_rb(obj)
        if rb is not None:
            s, tag, phase, value = rb
            if tag != self.tag or env.recipient != env.sender:
                return
            # copy the correct process's own echo/ready pattern
            if phase in (ECHO, READY):
                for b in sorted(sim.faulty):
                    for i in sim.correct:
                        key = (b, i, s, phase)
                        if key in self._done:
                            continue
                        self._done.add(key)
                        sim.emit(b, i, rb_message(s, tag, phase, value), delay=self.delay)
            return
        ph = parse_phase(obj, sim.n)
        if ph is not None and env.recipient == env.sender:
            for b in sorted(sim.faulty):
                sim.emit(b, env.sender, env.payload, delay=self.delay)


class RandomGatherAdversary(Watcher):
    """Fuzzing adversary for gather-based protocols.

    Faulty processes broadcast random values (possibly equivocating on INIT),
    echo and ready arbitrary values, and send phase messages built from random
    subsets of pairs some correct process accepted, or pure garbage.  Every
    reaction is bounded, so runs stay finite.
    """

    def __init__(self, seed, values=(0, 1, 2), tag=RB_TAG, extra=None, max_emits=4000):
        super().__init__()
        self.rng = random.Random(seed)
        self.values = list(values)
        self.tag = tag
        self.extra = extra
        self.budget = max_emits

    def _emit(self, sim, b, i, payload):
        if self.budget <= 0:
            return
        self.budget -= 1
        sim.emit(b, i, payload)

    def start(self, sim):
        rng = self.rng
        for b in sorted(sim.faulty):
            mode = rng.random()
            for i in sim.correct:
                if mode < 0.2:
                    continue
                if mode < 0.5:
                    v = rng.choice(self.values)
                else:
                    v = self.values[b % len(self.values)]
                self._emit(sim, b, i, rb_message(b, self.tag, INIT, v))

    def on_send(self, sim, env):
        rng = self.rng
        if env.recipient != env.sender:
            return
        obj = wire.decode(env.payload)
        rb = parse_rb(obj)
        if rb is not None:
            s, tag, phase, value = rb
            if tag != self.tag or phase == INIT:
                return
            for b in sorted(sim.faulty):
                for i in sim.correct:
                    r = rng.random()
                    if r < 0.6:
                        self._emit(sim, b, i, rb_message(s, tag, phase, value))
                    elif r < 0.75:
                        self._emit(sim, b, i, rb_message(s, tag, phase, rng.choice(self.values)))
            return
        ph = parse_phase(obj, sim.n)
        if ph is not None:
            phase, pairs = ph
            for b in sorted(sim.faulty):
                for i in sim.correct:
                    r = rng.random()
                    if r < 0.5:
                        self._emit(sim, b, i, env.payload)
                    elif r < 0.8:
                        src = dict(pairs)
                        keys = sorted(src)
                        sub = {k: src[k] for k in keys if rng.random() < 0.7}
                        if rng.random() < 0.3:
                            sub[b] = rng.choice(self.values)
                        self._emit(sim, b, i, phase_message(phase, sub))
                    elif r < 0.9:
                        self._emit(sim, b, i, b'["G",%d,"junk"]' % phase)
            return
        if self.extra is not None:
            self.extra(self, sim, env)
