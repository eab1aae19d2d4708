"""Handover success against mobile beamwidth on the walking path.

    python scripts/beamwidth_sweep.py [--trials 500] [--out results/beamwidth.csv]

Prints one line per codebook and writes the plot-ready CSV (plus a .json
with the full per-cell report).
"""

import argparse
import time
from pathlib import Path

from silent_tracker.config import load_config
from silent_tracker.engine import run_sweep
from silent_tracker.metrics_io import write_report

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=ROOT / "configs" / "beamwidth_sweep.json")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--beamwidths", default="20,30,45,60,90,omni")
    ap.add_argument("--out", default=ROOT / "results" / "beamwidth.csv")
    a = ap.parse_args()

    cfg = load_config(a.config)
    books = [b if b == "omni" else float(b) for b in a.beamwidths.split(",")]
    t0 = time.perf_counter()
    rep = run_sweep(cfg, [cfg.scenario], books, a.trials)
    dt = time.perf_counter() - t0

    print(f"{'codebook':>8}  {'success':>7}  {'soft':>5}  {'mean lat (s)':>12}")
    for c in rep.cells:
        lat = "-" if c.mean_latency_s is None else f"{c.mean_latency_s:.3f}"
        print(f"{c.codebook:>8}  {c.success_rate:7.3f}  {c.soft_rate:5.3f}  {lat:>12}")
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(rep, "csv", out)
    write_report(rep, "json", out.with_suffix(".json"))
    print(f"{len(books) * a.trials} trials in {dt:.1f} s -> {out}")


if __name__ == "__main__":
    main()
