"""Command-line entry point.

Exit codes: 0 ok, 2 bad configuration / arguments / trace file, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from silent_tracker.codebook import OMNI
from silent_tracker.config import ConfigError, SimConfig, default_config, load_config, validate
from silent_tracker.engine import make_books, run_sweep, run_trial
from silent_tracker.metrics_io import TraceError, dumps_report, load_trace, replay, write_actions, write_report
from silent_tracker.mobility import Scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on its own; route it through the same diagnostic path
    def error(self, message: str):
        raise _UsageError(message)


def _config(path: str | None, seed: int | None) -> SimConfig:
    cfg = load_config(path) if path else default_config()
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return validate(cfg)


def _list(text: str) -> list[str]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise ConfigError("argv", "empty list")
    return items


def _beamwidths(text: str) -> list[float | str]:
    out: list[float | str] = []
    for x in _list(text):
        if x.lower() == OMNI:
            out.append(OMNI)
            continue
        try:
            out.append(float(x))
        except ValueError:
            raise ConfigError("--beamwidths", f"not a beamwidth: {x!r}") from None
    return out


def _scenarios(text: str) -> list[str]:
    names = _list(text)
    valid = {s.value for s in Scenario}
    for n in names:
        if n not in valid:
            raise ConfigError("--scenarios", f"unknown scenario {n!r} (choose from {', '.join(sorted(valid))})")
    return names


def cmd_simulate(a: argparse.Namespace) -> int:
    cfg = _config(a.config, a.seed)
    if a.trials < 1:
        raise ConfigError("--trials", f"must be >= 1, got {a.trials}")
    reports = [run_trial(cfg, i, keep_traces=a.out is not None) for i in range(a.trials)]
    report = reports[0] if a.trials == 1 else reports
    if a.out is None:
        sys.stdout.write(dumps_report(report))
        return EXIT_OK
    for p in write_report(report, a.format, a.out):
        print(p)
    return EXIT_OK


def cmd_sweep(a: argparse.Namespace) -> int:
    cfg = _config(a.config, a.seed)
    rep = run_sweep(cfg, _scenarios(a.scenarios), _beamwidths(a.beamwidths), a.trials)
    out = Path(a.out)
    if out.suffix == ".json":
        out = out.with_suffix(".csv")
    write_report(rep, "csv", out)
    write_report(rep, "json", out.with_suffix(".json"))
    print(out)
    print(out.with_suffix(".json"))
    return EXIT_OK


def cmd_replay(a: argparse.Namespace) -> int:
    cfg = _config(a.config, None)
    trace = load_trace(a.trace)
    log = replay(trace, make_books(cfg), cfg.protocol)
    write_actions(log, a.out)
    print(a.out)
    return EXIT_OK


def cmd_validate(a: argparse.Namespace) -> int:
    cfg = _config(a.config, None)
    print(f"ok: {len(cfg.cells)} cells, scenario {cfg.scenario}, mobile codebook {cfg.mobile.book.label}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="silent-tracker", description="Silent beam tracking for mm-wave soft handover.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one trial (or --trials N)")
    s.add_argument("--config", help="JSON config (default: walk scenario defaults)")
    s.add_argument("--seed", type=int, help="overrides the config seed")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--out", help="report path; traces go next to it (default: report to stdout)")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="scenario x beamwidth sweep")
    w.add_argument("--config")
    w.add_argument("--seed", type=int)
    w.add_argument("--scenarios", default="walk")
    w.add_argument("--beamwidths", default="20,60,omni")
    w.add_argument("--trials", type=int, default=100)
    w.add_argument("--out", required=True, help="plot-ready CSV; the full report is written alongside as .json")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("replay", help="run a recorded RSS trace through the state machine")
    r.add_argument("--trace", required=True)
    r.add_argument("--out", required=True, help="action log CSV")
    r.add_argument("--config", help="supplies codebooks and protocol constants")
    r.set_defaults(func=cmd_replay)

    v = sub.add_parser("validate-config", help="check a config file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (_UsageError, ConfigError, TraceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - the exit code is the contract
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
