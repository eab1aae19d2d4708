"""Regenerate the frozen replay fixtures in tests/data.

Runs trial 0 of configs/rotation.json, writes its RSS trace, replays the trace
open-loop and writes the resulting action log. Refuses to write if the replay
disagrees with the simulator's own log.
"""

import sys
from pathlib import Path

from silent_tracker.config import load_config
from silent_tracker.engine import make_books, run_trial
from silent_tracker.metrics_io import load_trace, replay, write_actions, write_trace

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    cfg = load_config(ROOT / "configs" / "rotation.json")
    report = run_trial(cfg, 0)
    out = ROOT / "tests" / "data"
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "golden_trace.csv"
    write_trace(report.trace, trace_path)
    log = replay(load_trace(trace_path), make_books(cfg), cfg.protocol)
    if log != report.actions:
        print("replay disagrees with the simulator; fixtures not updated", file=sys.stderr)
        trace_path.unlink()
        return 1
    write_actions(log, out / "golden_actions.csv")
    print(f"{trace_path.name}: {len(report.trace)} rows, golden_actions.csv: {len(log)} actions ({report.outcome})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
