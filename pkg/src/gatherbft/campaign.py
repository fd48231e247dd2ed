"""Seeded fuzz campaigns.

A trial is fully described by a :class:`TrialConfig`; its seed drives the
inputs, the faulty set, the delays and the adversary.  Every trace carries
its config in ``meta["trial"]``, so a dumped trace is enough to rebuild the
machines and replay the run from its own records.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

from . import traceio
from .adversary import RandomGatherAdversary
from .cc import ConnectedConsensus, CrusaderRB, iterations_for
from .checkers import Check, check_cc, check_crusader, check_gather, check_rb
from .gather import GatherMachine
from .rb import RbMachine
from .sim import Fuzzed, Scripted, Simulation, UndefinedTime, all_correct_decided, normalized_time

PROTOCOLS = ("rb", "gather", "cc", "crusader-rb")

DELAY_SETS = (
    (Fraction(1, 2), Fraction(1)),
    (Fraction(1, 4), Fraction(1, 2), Fraction(1)),
    (Fraction(1),),
    (Fraction(1, 3), Fraction(1)),
)

RB_TCOR, RB_TREL = 3, 2


@dataclass
class TrialConfig:
    protocol: str
    n: int
    f: int
    seed: int
    R: int = 1
    binding: bool = False
    max_events: int = 500_000

    def label(self) -> str:
        extra = f" R={self.R}" if self.protocol == "cc" else ""
        mode = (" binding" if self.binding else " non-binding") if self.protocol in ("gather", "cc") else ""
        return f"{self.protocol} n={self.n} f={self.f}{extra}{mode} seed={self.seed}"


@dataclass
class TrialResult:
    config: TrialConfig
    trace: object
    checks: list
    machines: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


def _validate(cfg: TrialConfig):
    if cfg.protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {cfg.protocol!r}; known: {', '.join(PROTOCOLS)}")
    if cfg.f < 0 or cfg.n <= 3 * cfg.f:
        raise ValueError(f"need n > 3f (n={cfg.n}, f={cfg.f})")
    if cfg.protocol == "crusader-rb" and cfg.n <= 4 * cfg.f:
        raise ValueError(f"crusader-rb needs n > 4f (n={cfg.n}, f={cfg.f})")
    if cfg.R < 1:
        raise ValueError(f"R must be at least 1, got {cfg.R}")


def trial_setup(cfg: TrialConfig):
    """Inputs, faulty set, machine factory, adversary and schedule of a trial,
    all derived from the seed."""
    _validate(cfg)
    rng = random.Random(cfg.seed)
    n, f = cfg.n, cfg.f
    domain = list(range(rng.choice((1, 2, 3))))
    inputs = {p: rng.choice(domain) for p in range(n)}
    faulty = sorted(rng.sample(range(n), f))
    delays = rng.choice(DELAY_SETS)
    adv_seed = rng.getrandbits(64)
    values = domain + [len(domain)]
    if cfg.protocol == "rb":
        sender = rng.choice(range(n))
        inputs = {sender: inputs[sender]}
        tag = "rb"
        factory = lambda p: RbMachine(n, f, p, sender, inputs.get(p))
    elif cfg.protocol == "gather":
        tag = "G"
        factory = lambda p: GatherMachine(n, f, p, inputs[p], binding=cfg.binding)
    elif cfg.protocol == "cc":
        tag = "G"
        factory = lambda p: ConnectedConsensus(n, f, p, inputs[p], R=cfg.R, binding=cfg.binding)
    else:
        tag = "CA"
        factory = lambda p: CrusaderRB(n, f, p, inputs[p])
    adversary = RandomGatherAdversary(adv_seed, values=values, tag=tag)
    schedule = Fuzzed(adv_seed ^ 0x5DEECE66D, delays=delays)
    extra = {"sender": sender} if cfg.protocol == "rb" else {}
    return inputs, faulty, factory, adversary, schedule, extra


def build_trial(cfg: TrialConfig) -> Simulation:
    inputs, faulty, factory, adversary, schedule, extra = trial_setup(cfg)
    sim = Simulation(cfg.n, cfg.f, faulty, inputs, factory, adversary=adversary,
                     schedule=schedule, label=cfg.label())
    sim.trace.meta = {"trial": asdict(cfg), **extra}
    return sim


def time_bound(cfg: TrialConfig) -> Optional[int]:
    if cfg.protocol == "rb":
        return None
    if cfg.protocol == "crusader-rb":
        return None
    y = RB_TCOR + (3 if cfg.binding else 2) * max(1, RB_TREL)
    if cfg.protocol == "gather":
        return y
    return y + 4 * iterations_for(cfg.R)


def assess_trial(trace, machines=None) -> list[Check]:
    """Property checks for a trial trace; extra invariants when the live
    machines are at hand."""
    cfg = TrialConfig(**trace.meta["trial"])
    if cfg.protocol == "rb":
        sender = trace.meta["sender"]
        checks = check_rb(trace, sender, trace.inputs.get(sender))
        complete = trace.stop_reason in ("predicate", "quiescent")
        missing = trace.undecided()
        # a faulty sender need not get anything accepted
        if sender not in trace.faulty or any(p in trace.decisions for p in trace.correct):
            checks.append(Check("rb completes", complete and not missing,
                                f"stop {trace.stop_reason}, undecided {missing}" if missing else ""))
        return checks
    if cfg.protocol == "gather":
        checks = check_gather(trace)
    elif cfg.protocol == "cc":
        checks = check_cc(trace, cfg.R, machines)
    else:
        checks = check_crusader(trace)
    bound = time_bound(cfg)
    if bound is not None:
        try:
            t = normalized_time(trace)
            checks.append(Check(f"running time within {bound}", t <= bound, str(t)))
        except UndefinedTime as exc:
            checks.append(Check(f"running time within {bound}", False, str(exc)))
    return checks


def run_trial(cfg: TrialConfig) -> TrialResult:
    sim = build_trial(cfg)
    trace = sim.run_until(all_correct_decided, max_events=cfg.max_events)
    return TrialResult(cfg, trace, assess_trial(trace, sim.machines), sim.machines)


def replay(trace):
    """Re-run a trial trace from its own records, with no adversary."""
    cfg = TrialConfig(**trace.meta["trial"])
    inputs, faulty, factory, _adv, _sched, _extra = trial_setup(cfg)
    sim = Simulation(cfg.n, cfg.f, faulty, inputs, factory,
                     schedule=Scripted(traceio.replay_directives(trace)), label=trace.label)
    sim.trace.meta = dict(trace.meta)
    sim.run_until(all_correct_decided, max_events=max(1, len(trace.events) + 1))
    sim.trace.stop_reason = trace.stop_reason
    return sim.trace


def _rb_params(rng):
    n = rng.choice((4, 7, 10))
    return dict(protocol="rb", n=n, f=(n - 1) // 3)


def _gather_params(rng):
    n = rng.randint(4, 10)
    return dict(protocol="gather", n=n, f=(n - 1) // 3, binding=rng.random() < 0.5)


def _cc_params(rng):
    n = rng.choice((4, 4, 5, 7))
    return dict(protocol="cc", n=n, f=(n - 1) // 3, R=rng.choice((1, 2, 4, 8)),
                binding=rng.random() < 0.5)


def _crusader_params(rng):
    return dict(protocol="crusader-rb", n=5, f=1)


CAMPAIGNS = {"rb": _rb_params, "gather": _gather_params, "cc": _cc_params, "crusader-rb": _crusader_params}


@dataclass
class CampaignSummary:
    protocol: str
    trials: int
    failures: list
    max_time: Optional[Fraction]
    dumped: list

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        out = [f"{self.protocol}: {self.trials} trials, {len(self.failures)} failures"
               + (f", max normalized time {self.max_time}" if self.max_time is not None else "")]
        for res in self.failures[:10]:
            bad = [c.line() for c in res.checks if not c.ok]
            out.append(f"  {res.config.label()}: " + "; ".join(bad))
        for path in self.dumped[:10]:
            out.append(f"  dumped {path}")
        return out


def campaign_configs(protocol, trials, seed, **fixed):
    """Trial configs for a campaign.  ``fixed`` pins n, f, R or binding."""
    if protocol not in CAMPAIGNS:
        raise ValueError(f"unknown protocol {protocol!r}; known: {', '.join(PROTOCOLS)}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = random.Random(seed)
    out = []
    for i in range(trials):
        params = CAMPAIGNS[protocol](rng)
        for k, v in fixed.items():
            if v is not None:
                params[k] = v
        if fixed.get("n") is not None and fixed.get("f") is None:
            params["f"] = (params["n"] - 1) // (5 if protocol == "crusader-rb" else 3)
        out.append(TrialConfig(seed=seed * 1_000_003 + i, **params))
    return out


def run_campaign(protocol, trials, seed=0, out_dir=None, max_events=None, progress=None,
                 **fixed) -> CampaignSummary:
    failures, dumped = [], []
    worst = None
    for cfg in campaign_configs(protocol, trials, seed, **fixed):
        if max_events:
            cfg.max_events = max_events
        res = run_trial(cfg)
        try:
            t = normalized_time(res.trace)
            worst = t if worst is None else max(worst, t)
        except UndefinedTime:
            pass
        if not res.ok:
            failures.append(res)
            if out_dir:
                dumped.append(dump_failure(res, out_dir))
        if progress:
            progress(res)
    return CampaignSummary(protocol, trials, failures, worst, dumped)


def dump_failure(res: TrialResult, out_dir) -> str:
    """Write the trace (which doubles as the replay script) and the seed."""
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, f"{res.config.protocol}-seed{res.config.seed}")
    traceio.write_traces(base + ".jsonl", [res.trace])
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump({"config": asdict(res.config),
                   "failed": [c.line() for c in res.checks if not c.ok]}, fh, indent=2)
    return base + ".jsonl"
