"""Bracha reliable broadcast.

One :class:`RbInstance` per (sender, tag).  :class:`RbLayer` multiplexes all
instances that share a tag over the same links, and :class:`RbMachine` wraps a
single instance as a stand-alone protocol machine whose decision is the
accepted value.

Wire layout: ``["RB", [sender, tag], phase, value]`` with phase one of
``INIT``, ``ECHO``, ``READY``.
"""

from __future__ import annotations

from . import wire

INIT = "INIT"
ECHO = "ECHO"
READY = "READY"
PHASES = (INIT, ECHO, READY)


class RbError(Exception):
    pass


def ready_threshold(n: int, f: int) -> int:
    # smallest integer strictly above (n + f) / 2
    return (n + f) // 2 + 1


def accept_threshold(f: int) -> int:
    return 2 * f + 1


def rb_message(sender, tag, phase, value) -> bytes:
    return wire.encode(["RB", [sender, tag], phase, value])


def parse_rb(obj):
    """Return ``(sender, tag, phase, value)`` or ``None`` for anything else."""
    if not isinstance(obj, list) or len(obj) != 4 or obj[0] != "RB":
        return None
    inst, phase, value = obj[1], obj[2], obj[3]
    if not isinstance(inst, list) or len(inst) != 2 or phase not in PHASES:
        return None
    sender = inst[0]
    if not isinstance(sender, int) or isinstance(sender, bool):
        return None
    return sender, inst[1], phase, value


class RbInstance:
    """Participant state for one broadcast instance at process ``me``."""

    def __init__(self, n, f, me, sender, tag=None, amplify=True):
        self.n = n
        self.f = f
        self.me = me
        self.sender = sender
        self.tag = tag
        self.amplify = amplify
        self.broadcast_done = False
        self.sent_echo = False
        self.sent_ready = False
        self.accepted = False
        self.accepted_value = None
        self.init_seen = False
        self.echo_from: dict[int, str] = {}
        self.ready_from: dict[int, str] = {}
        self.echo_counts: dict[str, int] = {}
        self.ready_counts: dict[str, int] = {}
        self.values: dict[str, object] = {}

    def _to_all(self, phase, value):
        payload = rb_message(self.sender, self.tag, phase, value)
        return [(j, payload) for j in range(self.n)]

    def broadcast(self, value):
        if self.me != self.sender:
            raise RbError(f"process {self.me} is not the sender of instance {self.sender}")
        if self.broadcast_done:
            raise RbError(f"instance {self.sender} already broadcast")
        self.broadcast_done = True
        return self._to_all(INIT, value)

    def on_message(self, peer, phase, value):
        """Handle one message; returns ``(sends, accepted)`` where ``accepted``
        is True only on the event that triggers acceptance."""
        key = wire.value_key(value)
        self.values.setdefault(key, value)
        sends = []
        if phase == INIT:
            if peer != self.sender or self.init_seen:
                return sends, False
            self.init_seen = True
            if not self.sent_echo:
                self.sent_echo = True
                sends += self._to_all(ECHO, value)
            return sends, False
        if phase == ECHO:
            if peer in self.echo_from:
                return sends, False
            self.echo_from[peer] = key
            self.echo_counts[key] = self.echo_counts.get(key, 0) + 1
            c = self.echo_counts[key]
            if self.amplify and not self.sent_echo and c >= self.f + 1:
                self.sent_echo = True
                sends += self._to_all(ECHO, value)
            if not self.sent_ready and c >= ready_threshold(self.n, self.f):
                self.sent_ready = True
                sends += self._to_all(READY, value)
            return sends, False
        if peer in self.ready_from:
            return sends, False
        self.ready_from[peer] = key
        self.ready_counts[key] = self.ready_counts.get(key, 0) + 1
        c = self.ready_counts[key]
        if not self.sent_ready and c >= self.f + 1:
            self.sent_ready = True
            sends += self._to_all(READY, value)
        if not self.accepted and c >= accept_threshold(self.f):
            self.accepted = True
            self.accepted_value = value
            return sends, True
        return sends, False


class RbLayer:
    """All ``n`` instances with a common tag, as seen by process ``me``."""

    def __init__(self, n, f, me, tag=None, amplify=True):
        self.n = n
        self.f = f
        self.me = me
        self.tag = tag
        self.instances = {s: RbInstance(n, f, me, s, tag, amplify) for s in range(n)}

    def broadcast(self, value):
        return self.instances[self.me].broadcast(value)

    def handle(self, peer, obj):
        """Process a decoded message; returns ``(sends, accepts)`` where
        ``accepts`` lists newly accepted ``(sender, value)`` pairs.  Returns
        ``None`` when the message does not belong to this layer."""
        parsed = parse_rb(obj)
        if parsed is None:
            return None
        sender, tag, phase, value = parsed
        if tag != self.tag or sender not in self.instances:
            return None
        inst = self.instances[sender]
        sends, accepted = inst.on_message(peer, phase, value)
        return sends, [(sender, value)] if accepted else []

    def accepted(self) -> dict:
        return {s: i.accepted_value for s, i in self.instances.items() if i.accepted}


class RbMachine:
    """A process taking part in a single reliable broadcast.

    The sender broadcasts ``value`` at WakeUp.  ``decision`` is the accepted
    value.
    """

    def __init__(self, n, f, me, sender, value=None, tag="rb", amplify=True):
        self.me = me
        self.value = value
        self.inst = RbInstance(n, f, me, sender, tag, amplify)
        self.decided = False
        self.decision = None

    def wakeup(self):
        if self.me == self.inst.sender:
            return self.inst.broadcast(self.value)
        return []

    def receive(self, peer, payload):
        parsed = parse_rb(wire.decode(payload))
        if parsed is None:
            return []
        sender, tag, phase, value = parsed
        if sender != self.inst.sender or tag != self.inst.tag:
            return []
        sends, accepted = self.inst.on_message(peer, phase, value)
        if accepted:
            self.decided = True
            self.decision = value
        return sends
