"""Binding and non-binding gather over reliable broadcast.

Every process reliably broadcasts its input; the accepted pairs form ``AP``.
With ``n - f`` accepted pairs a process sends them as its phase-2 message
(``T``).  In each following phase it waits for ``n - f`` *approved* messages of
the current phase (every pair of the message is already in ``AP``) and sends
the union of the first ``n - f`` of them, in arrival order, as its next phase
message.  The unions are ``U`` (from phase 2), ``V`` (phase 3) and ``W``
(phase 4).  Non-binding gather returns ``V``, binding gather returns ``W``.
When ``f == 1`` the shortcut returns one phase earlier (``U`` / ``V``).

Phase message layout: ``["G", phase, [[id, value], ...]]`` sorted by id.
"""

from __future__ import annotations

from typing import Optional

from . import wire
from .rb import RbLayer

RB_TAG = "G"
SET_NAMES = {1: "T", 2: "U", 3: "V", 4: "W"}


class GatherError(Exception):
    pass


def last_phase(binding: bool, f1_shortcut: bool) -> int:
    """Index of the phase whose union is returned (2 = U, 3 = V, 4 = W)."""
    return (4 if binding else 3) - (1 if f1_shortcut else 0)


def phase_message(phase: int, pairs: dict) -> bytes:
    return wire.encode(["G", phase, [[k, pairs[k]] for k in sorted(pairs)]])


def parse_phase(obj, n):
    """``(phase, pairs)`` for a well-formed phase message, else ``None``."""
    if not isinstance(obj, list) or len(obj) != 3 or obj[0] != "G":
        return None
    phase, items = obj[1], obj[2]
    if phase not in (2, 3, 4) or not isinstance(items, list):
        return None
    pairs = {}
    for item in items:
        if not isinstance(item, list) or len(item) != 2:
            return None
        pid = item[0]
        if not isinstance(pid, int) or isinstance(pid, bool) or not 0 <= pid < n:
            return None
        if pid in pairs:
            return None
        pairs[pid] = item[1]
    return phase, pairs


class Gather:
    """Gather as a component; the hosting machine forwards decoded messages.

    ``sets`` maps phase index to the set computed there: 1 -> T, 2 -> U,
    3 -> V, 4 -> W.  ``output`` is set once, when gather returns.
    """

    def __init__(self, n, f, me, binding=False, f1_shortcut=False, amplify=True):
        if n <= 3 * f:
            raise GatherError(f"gather needs n > 3f (n={n}, f={f})")
        if f1_shortcut and f != 1:
            raise GatherError(f"the phase shortcut is only sound for f = 1 (f={f})")
        self.n = n
        self.f = f
        self.me = me
        self.binding = binding
        self.f1_shortcut = f1_shortcut
        self.final = last_phase(binding, f1_shortcut)
        self.rb = RbLayer(n, f, me, RB_TAG, amplify)
        self.AP: dict[int, object] = {}
        # single slot per peer per phase, plus arrival order
        self.RM: dict[int, dict[int, dict]] = {2: {}, 3: {}, 4: {}}
        self.arrival: dict[int, list[int]] = {2: [], 3: [], 4: []}
        self.approved_from: dict[int, list[int]] = {}
        self.sets: dict[int, dict] = {}
        self.stage = 0
        self.output: Optional[dict] = None

    @property
    def started(self):
        return self.stage > 0

    def start(self, value):
        if self.started:
            raise GatherError("gather already started")
        self.stage = 1
        return self.rb.broadcast(value) + self._advance()

    def approved(self, pairs: dict) -> bool:
        AP = self.AP
        for k, v in pairs.items():
            if k not in AP or wire.value_key(AP[k]) != wire.value_key(v):
                return False
        return True

    def handle(self, peer, obj):
        """Returns outbound messages, or ``None`` if ``obj`` is not a gather
        message."""
        res = self.rb.handle(peer, obj)
        if res is not None:
            sends, accepts = res
            for s, value in accepts:
                self.AP[s] = value
            return sends + self._advance()
        parsed = parse_phase(obj, self.n)
        if parsed is None:
            if isinstance(obj, list) and obj and obj[0] == "G":
                return []
            return None
        phase, pairs = parsed
        if peer in self.RM[phase]:
            return []
        self.RM[phase][peer] = pairs
        self.arrival[phase].append(peer)
        return self._advance()

    def _advance(self):
        sends = []
        while self.output is None and self.stage > 0:
            if self.stage == 1:
                if len(self.AP) < self.n - self.f:
                    break
                self.sets[1] = dict(self.AP)
                msg = phase_message(2, self.sets[1])
                sends += [(j, msg) for j in range(self.n)]
                self.stage = 2
                continue
            r = self.stage
            chosen = []
            for peer in self.arrival[r]:
                if self.approved(self.RM[r][peer]):
                    chosen.append(peer)
                    if len(chosen) == self.n - self.f:
                        break
            if len(chosen) < self.n - self.f:
                break
            union = {}
            for peer in chosen:
                union.update(self.RM[r][peer])
            self.approved_from[r] = chosen
            self.sets[r] = union
            if r == self.final:
                self.output = union
                break
            msg = phase_message(r + 1, union)
            sends += [(j, msg) for j in range(self.n)]
            self.stage = r + 1
        return sends


class GatherMachine:
    """Stand-alone gather protocol machine; decision is the output pair set
    as a dict id -> value."""

    def __init__(self, n, f, me, value, binding=False, f1_shortcut=False, amplify=True):
        self.value = value
        self.g = Gather(n, f, me, binding, f1_shortcut, amplify)
        self.decided = False
        self.decision = None

    def wakeup(self):
        out = self.g.start(self.value)
        self._check()
        return out

    def receive(self, peer, payload):
        out = self.g.handle(peer, wire.decode(payload)) or []
        self._check()
        return out

    def _check(self):
        if not self.decided and self.g.output is not None:
            self.decided = True
            self.decision = dict(self.g.output)


def pairset(d: dict) -> frozenset:
    """Hashable canonical form of a pair dict."""
    return frozenset((k, wire.value_key(v)) for k, v in d.items())
