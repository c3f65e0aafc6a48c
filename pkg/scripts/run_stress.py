#!/usr/bin/env python3
"""Seeded stress runs for every structure, in replay and free-running mode."""
import argparse
import time

from traverse_lab import battery
from traverse_lab.explore import random_workload, run_stress
from traverse_lab.structures import STRUCTURES

EFFECT_ONLY = battery.BatteryConfig(lin_search_max_ops=0, traversals=False, forepassed=False,
                                    fields=False, lemmas=False)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--ops", type=int, default=200)
    ap.add_argument("--seeds", type=int, nargs="+", default=[7])
    ap.add_argument("--full", action="store_true", help="run the whole battery, not just effect points")
    args = ap.parse_args()
    cfg = battery.BatteryConfig(lin_search_max_ops=0) if args.full else EFFECT_ONLY
    for s in sorted(STRUCTURES):
        for seed in args.seeds:
            for mode in ("replay", "free"):
                t0 = time.monotonic()
                run = run_stress(random_workload(s, args.threads, args.ops, seed=seed), seed, mode)
                res = battery.check_trace(run.trace, s, (), cfg)
                print(f"{s:9s} seed={seed} {mode:6s} {run.status:8s} writes={len(run.trace.writes):5d} "
                      f"{'ok' if res.ok else res.failed} {time.monotonic() - t0:.1f}s")


if __name__ == "__main__":
    main()
