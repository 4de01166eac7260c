"""Command line: run one scenario file or the profile x attack matrix."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from . import attacks as atk
from .scenario import (
    PROFILE_NAMES,
    InvalidScenario,
    Scenario,
    check_expectations,
    default_out_dir,
    export_trace,
    load_scenario,
    parse_mitigations,
    report,
    run_matrix,
    run_scenario,
)


def _out_path(arg: Optional[str]) -> Optional[Path]:
    if arg is None:
        return None
    p = Path(arg)
    return p if p.is_absolute() or p.parent != Path(".") else default_out_dir() / p


def _csv(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cantp-sim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("--scenario", required=True, help="INI scenario file")
    run.add_argument("--attack", help="override the attack (A1..A8 or none)")
    run.add_argument("--profile", choices=PROFILE_NAMES, help="override the endpoint profile")
    run.add_argument("--mitigations", help="all, none, m1,m5 or all-m3 (hardened profile)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--trace", help="write a candump-style trace here")
    run.add_argument("--report", help="write the JSON report here")

    mx = sub.add_parser("matrix", help="run every profile against every attack")
    mx.add_argument("--scenario", help="base scenario file (defaults built in)")
    mx.add_argument("--profiles", default=",".join(PROFILE_NAMES))
    mx.add_argument("--attacks", default="none," + ",".join(atk.ATTACK_IDS))
    mx.add_argument("--mitigations", help="mitigation set for the hardened profile")
    mx.add_argument("--seed", type=int)
    mx.add_argument("--report", help="write the JSON report here")
    return ap


def _apply_overrides(sc: Scenario, args) -> Scenario:
    changes = {}
    if getattr(args, "attack", None):
        a = args.attack.strip()
        changes["attack"] = (
            None if a.lower() == "none" else atk.default_spec(a, wait_count=sc.transport.wft_max)
        )
    if getattr(args, "profile", None):
        changes["profile"] = args.profile
    if args.mitigations:
        changes["mitigations"] = parse_mitigations(args.mitigations)
    if args.seed is not None:
        changes["seed"] = args.seed
    return sc.with_(**changes) if changes else sc


def cmd_run(args) -> int:
    sc = _apply_overrides(load_scenario(args.scenario), args)
    result = run_scenario(sc)
    o = result.outcome
    print(f"{o.name}: {o.profile} / {o.attack} -> {o.label}, attempts {o.attempts}, "
          f"elapsed {o.elapsed_us} us, factor {o.factor:.2f}" if o.factor else
          f"{o.name}: {o.profile} / {o.attack} -> {o.label}, attempts {o.attempts}")
    for alert in o.alerts:
        print(f"  alert {alert}")
    for note in o.notes:
        print(f"  note {note}")
    if args.trace:
        export_trace(result.trace, _out_path(args.trace))
    if args.report:
        _out_path(args.report).write_text(report([o]), encoding="utf-8")
    failures = check_expectations(o, sc.expect)
    for f in failures:
        print(f"  FAILED {f}")
    return 1 if failures else 0


def cmd_matrix(args) -> int:
    base = load_scenario(args.scenario) if args.scenario else Scenario(name="matrix")
    base = _apply_overrides(base, args)
    attacks = [None if a.lower() == "none" else a.upper() for a in _csv(args.attacks)]
    outcomes = run_matrix(base, _csv(args.profiles), attacks)
    for o in outcomes:
        alerts = ",".join(o.alert_classes) or "-"
        print(f"{o.profile:16s} {o.attack:5s} {o.label:40s} attempts={o.attempts} alerts={alerts}")
    if args.report:
        _out_path(args.report).write_text(report(outcomes), encoding="utf-8")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_matrix(args)
    except (InvalidScenario, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
