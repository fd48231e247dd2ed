"""Command-line front end.

    gatherbft run SCENARIO [options]     run a catalog scenario
    gatherbft run --schedule FILE        replay a dumped fuzz trace
    gatherbft fuzz PROTOCOL [options]    seeded fuzz campaign
    gatherbft check FILE                 re-check a stored trace file
    gatherbft list                       show the scenario catalog

Exit codes: 0 all checks passed, 1 some property failed, 2 usage or parse
error.  GATHERBFT_SEED, GATHERBFT_TRIALS, GATHERBFT_MAX_EVENTS and
GATHERBFT_OUT override the defaults of the matching flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import campaign, scenarios, traceio
from .checkers import report_lines

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    seed = _env_int("GATHERBFT_SEED", None)
    trials = _env_int("GATHERBFT_TRIALS", 500)
    max_events = _env_int("GATHERBFT_MAX_EVENTS", None)
    out = os.environ.get("GATHERBFT_OUT") or None

    p = argparse.ArgumentParser(prog="gatherbft", description="Byzantine broadcast, gather and "
                                "connected consensus on a deterministic simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--n", type=int)
        sp.add_argument("--f", type=int)
        sp.add_argument("--R", type=int)
        sp.add_argument("--binding", dest="binding", action="store_const", const=True, default=None,
                        help="use binding gather")
        sp.add_argument("--no-binding", dest="binding", action="store_const", const=False)
        sp.add_argument("--seed", type=int, default=seed)
        sp.add_argument("--max-events", type=int, default=max_events)
        sp.add_argument("--out", default=out, help="directory for trace and report files")
        sp.add_argument("--json", action="store_true", help="machine-readable report")

    r = sub.add_parser("run", help="run a named scenario")
    r.add_argument("scenario", nargs="?")
    common(r)
    r.add_argument("--K", type=int, help="rounds to construct (triple scenarios)")
    r.add_argument("--omega", help="decision function (triple scenarios)")
    r.add_argument("--delays", help="unit or fuzz (timing scenarios)")
    r.add_argument("--extensions", type=int, help="fork count (f1-corner --binding)")
    r.add_argument("--schedule", help="replay this trace file instead of a scenario")

    fz = sub.add_parser("fuzz", help="seeded fuzz campaign")
    fz.add_argument("protocol", choices=campaign.PROTOCOLS)
    common(fz)
    fz.add_argument("--trials", type=int, default=trials)

    c = sub.add_parser("check", help="re-check a stored trace file")
    c.add_argument("file")
    c.add_argument("--json", action="store_true")

    sub.add_parser("list", help="list the scenario catalog")
    return p


def _emit(text, out_dir=None, name=None):
    sys.stdout.write(text)
    if out_dir and name:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)


def _scenario_params(args, sc) -> dict:
    given = {"n": args.n, "f": args.f, "R": args.R, "binding": args.binding, "seed": args.seed,
             "K": args.K, "omega": args.omega, "delays": args.delays, "extensions": args.extensions,
             "max_events": args.max_events}
    params = {}
    for k, v in given.items():
        if v is None:
            continue
        if k not in sc.defaults:
            raise UsageError(f"scenario {sc.name} does not take --{k.replace('_', '-')}")
        params[k] = v
    return params


def cmd_run(args) -> int:
    if args.schedule:
        if args.scenario:
            raise UsageError("give a scenario or --schedule, not both")
        return _replay(args)
    if not args.scenario:
        raise UsageError("run needs a scenario name (see `gatherbft list`)")
    if args.scenario not in scenarios.CATALOG:
        raise UsageError(f"unknown scenario {args.scenario!r}; known: {', '.join(sorted(scenarios.CATALOG))}")
    sc = scenarios.CATALOG[args.scenario]
    try:
        report, traces = scenarios.run_scenario(args.scenario, **_scenario_params(args, sc))
    except scenarios.ScenarioError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        traceio.write_traces(os.path.join(args.out, f"{args.scenario}.jsonl"), traces)
    _emit(report.json() if args.json else report.text(), args.out, f"{args.scenario}.report")
    return EXIT_OK if report.ok else EXIT_FAIL


def _load(path):
    try:
        return traceio.read_traces(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except traceio.TraceParseError as exc:
        raise UsageError(f"{path}: parse error at {exc}") from None


def _replay(args) -> int:
    traces = _load(args.schedule)
    lines, ok = [], True
    for t in traces:
        if "trial" not in t.meta:
            raise UsageError(f"{args.schedule}: only fuzz traces can be replayed; use `check` for scenario traces")
        again = campaign.replay(t)
        same = traceio.same_trace(t, again)
        checks = campaign.assess_trial(again)
        ok = ok and same and all(c.ok for c in checks)
        lines.append(f"replay {t.label}: {'bit-identical' if same else 'DIVERGED'}")
        lines += report_lines(checks)
    lines.append(f"result: {'PASS' if ok else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out, "replay.report")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_fuzz(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    seed = args.seed if args.seed is not None else 0
    try:
        summary = campaign.run_campaign(args.protocol, args.trials, seed=seed, out_dir=args.out,
                                        max_events=args.max_events, n=args.n, f=args.f, R=args.R,
                                        binding=args.binding)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.json:
        text = json.dumps({
            "protocol": summary.protocol, "trials": summary.trials, "ok": summary.ok,
            "max_normalized_time": str(summary.max_time) if summary.max_time is not None else None,
            "failures": [{"config": vars(r.config), "failed": [c.line() for c in r.checks if not c.ok]}
                         for r in summary.failures],
            "dumped": summary.dumped,
        }, indent=2) + "\n"
    else:
        text = "\n".join(summary.lines()) + "\n"
    _emit(text, args.out, f"fuzz-{args.protocol}.report")
    return EXIT_OK if summary.ok else EXIT_FAIL


def check_file(path):
    """Report for a stored trace file: a scenario report, or trial checks."""
    traces = _load(path)
    if "scenario" in traces[0].meta:
        try:
            return scenarios.assess_traces(traces)
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"{path}: traces do not fit their scenario ({exc})") from None
    if all("trial" in t.meta for t in traces):
        rep = scenarios.Report("stored trials")
        for t in traces:
            rep.lines.append(t.label)
            rep.checks += campaign.assess_trial(t)
        return rep
    raise UsageError(f"{path}: traces carry neither a scenario nor a trial config")


def cmd_check(args) -> int:
    report = check_file(args.file)
    sys.stdout.write(report.json() if args.json else report.text())
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_list(args) -> int:
    for name in sorted(scenarios.CATALOG):
        sc = scenarios.CATALOG[name]
        opts = " ".join(f"{k}={v}" for k, v in sc.defaults.items())
        print(f"{name:14} {sc.summary}  [{opts}]")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "fuzz": cmd_fuzz, "check": cmd_check, "list": cmd_list}


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"gatherbft: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as exc:
        print(f"gatherbft: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
