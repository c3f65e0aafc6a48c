#!/usr/bin/env python3
"""Replay the scripted interference scenarios and print their expected verdicts."""
from traverse_lab import battery, explore


def main():
    for name in sorted(explore.SCENARIOS):
        print(name)
        for e in battery.scenario_report(name, explore.scenario(name)):
            print(f"  [{'ok' if e.ok else 'FAIL'}] {e.claim}" + (f"  ({e.detail})" if e.detail else ""))


if __name__ == "__main__":
    main()
