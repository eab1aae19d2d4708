"""Run the three mobility scenarios and summarize how the beams were tracked.

    python scripts/tracking_scenarios.py [--trials 20] [--codebook 20]
"""

import argparse
from collections import Counter

from silent_tracker.config import default_config
from silent_tracker.engine import run_trial


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--codebook", default="20")
    a = ap.parse_args()
    book = a.codebook if a.codebook == "omni" else float(a.codebook)

    for scenario in ("walk", "rotation", "vehicular"):
        cfg = default_config(scenario, codebook=book)
        reports = [run_trial(cfg, i, keep_traces=False) for i in range(a.trials)]
        outcomes = Counter(r.outcome for r in reports)
        aligned = [r.alignment_ratio for r in reports if r.alignment_ratio is not None]
        switches = [sum(r.rx_switch_count.values()) for r in reports]
        ho = [r.handover_time_s for r in reports if r.handover_time_s is not None]
        print(
            f"{scenario:>9}: {dict(outcomes)}"
            f"  alignment {min(aligned, default=float('nan')):.2f}-{max(aligned, default=float('nan')):.2f}"
            f"  rx switches {min(switches)}-{max(switches)}"
            f"  handover at {min(ho, default=float('nan')):.2f}-{max(ho, default=float('nan')):.2f} s"
        )


if __name__ == "__main__":
    main()
