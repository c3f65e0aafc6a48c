#!/usr/bin/env python3
"""Run every registered mutation on its targeted workload and list what breaks."""
import time

from traverse_lab import battery, explore


def main():
    for name, (structure, desc) in sorted(explore.MUTATIONS.items()):
        t0 = time.monotonic()
        s = battery.check_workloads(explore.mutation_workloads(name))
        bad = {c: n for c, n in s.failures.items() if n}
        print(f"{name} ({structure}: {desc})")
        print(f"  {s.unique} traces, {time.monotonic() - t0:.1f}s, failing conditions: {bad}")
        for cond, ex in sorted(s.examples.items()):
            print(f"    {cond}: {ex['chain']}")


if __name__ == "__main__":
    main()
