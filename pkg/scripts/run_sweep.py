#!/usr/bin/env python3
"""Exhaustive sweep with the full battery; one summary JSON per structure."""
import argparse
import json
import time
from pathlib import Path

from traverse_lab import battery, explore
from traverse_lab.structures import STRUCTURES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("structures", nargs="*", default=sorted(STRUCTURES))
    ap.add_argument("--preemptions", type=int, default=2)
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in args.structures:
        t0 = time.monotonic()
        summary = battery.check_workloads(explore.sweep_workloads(s), args.preemptions)
        summary.stats["seconds"] = round(time.monotonic() - t0, 1)
        (out / f"{s}.json").write_text(json.dumps(summary.to_json(), indent=2, default=str))
        bad = {c: n for c, n in summary.failures.items() if n}
        print(f"{s:9s} {summary.traces:6d} schedules {summary.unique:6d} traces "
              f"{summary.stats['seconds']:6.1f}s  failing: {bad or 'none'}")


if __name__ == "__main__":
    main()
