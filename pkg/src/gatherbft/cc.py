"""Connected consensus from gather, and crusader agreement from reliable
broadcast.

:class:`ConnectedConsensus` runs gather, turns the gathered set into a graded
tuple ``(value, grade)`` with grade ``R`` or ``(None, 0)``, and then halves the
spread of grades ``ceil(log2 R)`` times with two rounds of echoes per
iteration.  ``None`` is the undecided value.  With ``R = 1`` it is crusader
agreement via gather.

Echo layout: ``["CC", "E1" | "E2", k, value, num, logden]``.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction
from typing import Optional

from . import wire
from .gather import Gather
from .rb import RbLayer

BOTTOM = None


class CcError(Exception):
    pass


def iterations_for(R: int) -> int:
    """ceil(log2 R) for R >= 1."""
    return (R - 1).bit_length()


def evaluate_gather(S: dict, f: int, R) -> tuple:
    """(v, R) if some value occurs at least |S| - f times, else (None, 0)."""
    counts = Counter(wire.value_key(v) for v in S.values())
    need = len(S) - f
    for v in S.values():
        if counts[wire.value_key(v)] >= need:
            return (v, Fraction(R))
    return (BOTTOM, Fraction(0))


def compatible(t1, t2) -> bool:
    v1, v2 = t1[0], t2[0]
    if v1 is BOTTOM and v2 is BOTTOM:
        return False
    if v1 is BOTTOM or v2 is BOTTOM:
        return True
    return wire.value_key(v1) == wire.value_key(v2)


def combine(t1, t2) -> tuple:
    """Average the grades of two compatible approved tuples; the result keeps
    the non-bottom value."""
    value = t1[0] if t1[0] is not BOTTOM else t2[0]
    return (value, (Fraction(t1[1]) + Fraction(t2[1])) / 2)


def final_vertex(t) -> tuple:
    g = int(Fraction(t[1]))  # floor, grades are nonnegative
    if g > 0:
        return (t[0], g)
    return (BOTTOM, 0)


def tuple_key(t) -> str:
    g = Fraction(t[1])
    return wire.value_key([t[0], g.numerator, g.denominator])


def echo_message(kind, k, t) -> bytes:
    num, logden = wire.encode_grade(t[1])
    return wire.encode(["CC", kind, k, t[0], num, logden])


def parse_echo(obj, K, R):
    if not isinstance(obj, list) or len(obj) != 6 or obj[0] != "CC":
        return None
    kind, k, value, num, logden = obj[1:]
    if kind not in ("E1", "E2"):
        return None
    if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= K:
        return None
    try:
        grade = wire.decode_grade(num, logden)
    except ValueError:
        return None
    if not 0 <= grade <= R:
        return None
    return kind, k, (value, grade)


class ConnectedConsensus:
    """One process of R-connected consensus.

    ``iterations[k]`` records the tuple the process started iteration ``k``
    with, the tuples it approved (in order) and the tuple it ended with.
    ``anomalies`` collects conditions that can only arise with more than ``f``
    faults, or a bug; they are never silently resolved.
    """

    def __init__(self, n, f, me, value, R=1, binding=True, f1_shortcut=False, amplify=True):
        if not isinstance(R, int) or R < 1:
            raise CcError(f"R must be an integer >= 1, got {R!r}")
        if n <= 3 * f:
            raise CcError(f"connected consensus needs n > 3f (n={n}, f={f})")
        self.n = n
        self.f = f
        self.me = me
        self.value = value
        self.R = R
        self.K = iterations_for(R)
        self.gather = Gather(n, f, me, binding, f1_shortcut, amplify)
        self.S: Optional[dict] = None
        self.current: Optional[tuple] = None
        self.k = 0
        self.approved: dict[int, list] = {k: [] for k in range(1, self.K + 1)}
        self._approved_keys: dict[int, set] = {k: set() for k in range(1, self.K + 1)}
        self.echo1: dict[tuple, set] = {}
        self.echo2: dict[tuple, set] = {}
        self._seen: set = set()
        self.echo1_sent: set = set()
        self.echo2_sent: dict[int, str] = {}
        self.tuples: dict[str, tuple] = {}
        self.iterations: dict[int, dict] = {}
        self.anomalies: list[str] = []
        self.decided = False
        self.decision = None
        self.picked = None

    # -- plumbing ------------------------------------------------------------

    def _to_all(self, payload):
        return [(j, payload) for j in range(self.n)]

    def wakeup(self):
        return self.gather.start(self.value) + self._main()

    def receive(self, peer, payload):
        obj = wire.decode(payload)
        out = self.gather.handle(peer, obj)
        if out is None:
            out = self._on_echo(peer, obj)
        return out + self._main()

    # -- echo threads ----------------------------------------------------------

    def _approve(self, k, key):
        if key in self._approved_keys[k]:
            return
        self._approved_keys[k].add(key)
        self.approved[k].append(self.tuples[key])
        if len(self.approved[k]) > 2:
            self.anomalies.append(f"iteration {k}: more than two approved tuples")

    def _on_echo(self, peer, obj):
        parsed = parse_echo(obj, self.K, self.R)
        if parsed is None:
            return []
        kind, k, t = parsed
        key = tuple_key(t)
        dedup = (peer, kind, k, key)
        if dedup in self._seen:
            return []
        self._seen.add(dedup)
        self.tuples.setdefault(key, t)
        sends = []
        if kind == "E1":
            senders = self.echo1.setdefault((k, key), set())
            senders.add(peer)
            c = len(senders)
            # the two thresholds are checked independently (see ledger)
            if c >= self.f + 1 and (k, key) not in self.echo1_sent:
                self.echo1_sent.add((k, key))
                sends += self._to_all(echo_message("E1", k, t))
            if c >= self.n - self.f:
                if k not in self.echo2_sent:
                    self.echo2_sent[k] = key
                    sends += self._to_all(echo_message("E2", k, t))
                self._approve(k, key)
        else:
            senders = self.echo2.setdefault((k, key), set())
            senders.add(peer)
            if len(senders) >= self.n - self.f:
                self._approve(k, key)
        return sends

    # -- main thread -------------------------------------------------------------

    def _echo2_quorum(self, k) -> bool:
        return any(k2 == k and len(s) >= self.n - self.f for (k2, _), s in self.echo2.items())

    def _start_iteration(self, k):
        self.k = k
        self.iterations[k] = {"start": self.current, "approved": None, "end": None}
        key = tuple_key(self.current)
        self.tuples.setdefault(key, self.current)
        sends = []
        if (k, key) not in self.echo1_sent:
            self.echo1_sent.add((k, key))
            sends += self._to_all(echo_message("E1", k, self.current))
        return sends

    def _main(self):
        sends = []
        if self.decided:
            return sends
        if self.S is None:
            if self.gather.output is None:
                return sends
            self.S = dict(self.gather.output)
            self.current = evaluate_gather(self.S, self.f, self.R)
            self.picked = self.current
            if self.R == 1:
                self._decide(self.current)
                return sends
            sends += self._start_iteration(1)
        while not self.decided:
            k = self.k
            at = self.approved[k]
            if not (len(at) >= 2 or (len(at) == 1 and self._echo2_quorum(k))):
                break
            if len(at) >= 2:
                t1, t2 = at[0], at[1]
                if compatible(t1, t2):
                    new = combine(t1, t2)
                else:
                    self.anomalies.append(
                        f"iteration {k}: incompatible approved tuples {t1!r} and {t2!r}")
                    new = t1
            else:
                new = at[0]
            self.iterations[k]["approved"] = list(at)
            self.iterations[k]["end"] = new
            self.current = new
            if k == self.K:
                self._decide(new)
                break
            sends += self._start_iteration(k + 1)
        return sends

    def _decide(self, t):
        self.final = t
        self.decided = True
        self.decision = final_vertex(t)


class CrusaderRB:
    """Crusader agreement from n concurrent reliable broadcasts (n > 4f).

    Decides ``v`` if the first ``n - f`` accepted values hold at least
    ``n - 2f`` copies of ``v``, else ``None``.
    """

    def __init__(self, n, f, me, value, amplify=True):
        if n <= 4 * f:
            raise CcError(f"crusader agreement via reliable broadcast needs n > 4f (n={n}, f={f})")
        self.n = n
        self.f = f
        self.me = me
        self.value = value
        self.rb = RbLayer(n, f, me, "CA", amplify)
        self.W: list = []
        self.decided = False
        self.decision = None

    def wakeup(self):
        return self.rb.broadcast(self.value)

    def receive(self, peer, payload):
        res = self.rb.handle(peer, wire.decode(payload))
        if res is None:
            return []
        sends, accepts = res
        for _s, v in accepts:
            if len(self.W) < self.n - self.f:
                self.W.append(v)
        if not self.decided and len(self.W) == self.n - self.f:
            self.decided = True
            self.decision = crusader_rule(self.W, self.f)
        return sends


def crusader_rule(W, f):
    counts = Counter(wire.value_key(v) for v in W)
    for v in W:
        if counts[wire.value_key(v)] >= len(W) - f:
            return v
    return BOTTOM
