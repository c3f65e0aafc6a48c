"""Command-line front end: explore, stress, check, scenario.

Exit codes: 0 when every check passes, 2 when a violation is found, 1 for
usage errors and malformed traces.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import battery, explore
from .structures import STRUCTURES
from .trace import TraceFault, dump_jsonl, load_jsonl

log = logging.getLogger("traverse_lab")

EXIT_OK, EXIT_FAULT, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAULT, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    subcommand: str
    structure: str | None = None
    threads: int | None = None
    ops: int | None = None
    keys: tuple = (1, 4)
    mutations: tuple = ()
    seed: int = 0
    max_traces: int = 1_000_000
    preemptions: int | None = 2
    out: str | None = None
    fmt: str = "table"
    verbose: int = 0

    def __post_init__(self):
        if self.structure is not None and self.structure not in STRUCTURES:
            raise UsageError(f"unknown structure {self.structure!r}; known: {sorted(STRUCTURES)}")
        for m in self.mutations:
            if m not in explore.MUTATIONS:
                raise UsageError(f"unknown mutation {m!r}; known: {sorted(explore.MUTATIONS)}")
            owner = explore.MUTATIONS[m][0]
            if self.structure is not None and owner != self.structure:
                raise UsageError(f"mutation {m!r} applies to {owner}, not {self.structure}")


def parse_keys(text: str) -> tuple:
    lo, sep, hi = text.partition("..")
    try:
        bounds = (int(lo), int(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if not sep or bounds[0] > bounds[1]:
        raise argparse.ArgumentTypeError(f"expected A..B with A <= B, got {text!r}")
    return bounds


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="traverse-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, structure_required=False):
        sp.add_argument("--structure", choices=sorted(STRUCTURES), required=structure_required)
        sp.add_argument("--keys", type=parse_keys, default=(1, 4), metavar="A..B")
        sp.add_argument("--mutate", action="append", default=[], metavar="NAME")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--format", choices=("json", "table"), default="table", dest="fmt")

    sp = sub.add_parser("explore", help="exhaustive schedules plus the full checker battery")
    common(sp)
    sp.add_argument("--threads", type=int, help="only workloads with at most this many threads")
    sp.add_argument("--ops", type=int, help="only workloads with at most this many ops per thread")
    sp.add_argument("--max-traces", type=int, default=1_000_000)
    sp.add_argument("--preemptions", type=int, default=2,
                    help="preemption bound; negative means unbounded")
    sp.add_argument("--workload", metavar="JSON", help="explore this workload file only")

    sp = sub.add_parser("stress", help="seeded random run plus effect-point checking")
    common(sp, structure_required=True)
    sp.add_argument("--threads", type=int, default=4)
    sp.add_argument("--ops", type=int, default=200)
    sp.add_argument("--mode", choices=("replay", "free"), default="replay")

    sp = sub.add_parser("check", help="run the battery over a saved JSON-lines trace")
    sp.add_argument("trace")
    sp.add_argument("--structure", choices=sorted(STRUCTURES))
    sp.add_argument("--mutate", action="append", default=[], metavar="NAME")
    sp.add_argument("--format", choices=("json", "table"), default="table", dest="fmt")
    sp.add_argument("--out", metavar="DIR")

    sp = sub.add_parser("scenario", help="scripted interference scenario with expected verdicts")
    sp.add_argument("name", choices=sorted(explore.SCENARIOS))
    sp.add_argument("--format", choices=("json", "table"), default="table", dest="fmt")
    sp.add_argument("--out", metavar="DIR")
    return p


# -- output -------------------------------------------------------------------

def _table(rows: list[tuple], header: tuple) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    line = lambda r: "  ".join(str(c).ljust(w) for c, w in zip(r, widths))
    return "\n".join([line(header), line(tuple("-" * w for w in widths)), *map(line, rows)])


def _emit(cfg: RunConfig, payload: dict, table: str) -> None:
    if cfg.fmt == "json":
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(table)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cfg.subcommand}-verdicts.json").write_text(json.dumps(payload, indent=2, default=str))


def _summary_table(summaries: list[battery.Summary]) -> str:
    rows = []
    for s in summaries:
        for cond in sorted(s.conditions):
            n = s.failures.get(cond, 0)
            rows.append((s.structure, cond, "FAIL" if n else "ok", n))
    body = _table(rows, ("structure", "condition", "verdict", "failing traces"))
    lines = [body, ""]
    for s in summaries:
        lines.append(f"{s.structure}: {s.traces} schedules, {s.unique} distinct traces, "
                     f"statuses {s.statuses}")
        for cond, ex in s.examples.items():
            lines.append(f"  {cond}: {ex['chain']}")
            lines.append(f"    at {ex['where']}")
    return "\n".join(lines)


# -- subcommands ----------------------------------------------------------------

def _workloads(cfg: RunConfig, structure: str, workload_path: str | None) -> list:
    if workload_path:
        wls = [explore.load_workload(workload_path)]
    else:
        wls = explore.sweep_workloads(structure)
        for m in cfg.mutations:
            wls += explore.mutation_workloads(m)
    out = []
    for wl in wls:
        if cfg.threads is not None and len(wl.threads) > cfg.threads:
            continue
        if cfg.ops is not None and max(len(t) for t in wl.threads) > cfg.ops:
            continue
        out.append(replace(wl, keys=cfg.keys if not workload_path else wl.keys,
                           mutations=tuple(sorted(set(wl.mutations) | set(cfg.mutations)))))
    if not out:
        raise UsageError("no workload fits the --threads/--ops limits")
    return out


def cmd_explore(cfg: RunConfig, workload_path: str | None = None) -> int:
    structures = [cfg.structure] if cfg.structure else sorted(STRUCTURES)
    if workload_path and not cfg.structure:
        structures = [explore.load_workload(workload_path).structure]
    summaries = []
    for s in structures:
        t0 = time.monotonic()
        wls = _workloads(cfg, s, workload_path)
        summary = battery.check_workloads(
            wls, cfg.preemptions, cfg.max_traces,
            progress=lambda wl, sm: log.info("%s: %d schedules so far", wl.name, sm.traces))
        summary.stats["seconds"] = round(time.monotonic() - t0, 2)
        summaries.append(summary)
    payload = {"ok": all(s.ok for s in summaries), "structures": [s.to_json() for s in summaries]}
    _emit(cfg, payload, _summary_table(summaries))
    return EXIT_OK if payload["ok"] else EXIT_VIOLATION


def cmd_stress(cfg: RunConfig, mode: str) -> int:
    wl = explore.random_workload(cfg.structure, cfg.threads, cfg.ops, cfg.keys, cfg.seed)
    wl = replace(wl, mutations=tuple(cfg.mutations))
    t0 = time.monotonic()
    run = explore.run_stress(wl, cfg.seed, mode)
    config = battery.BatteryConfig(lin_search_max_ops=0, traversals=False, soundness=False,
                                   forepassed=False, fields=False, lemmas=False)
    result = battery.check_trace(run.trace, cfg.structure, wl.mutations, config)
    ok = result.ok and run.status == "ok"
    payload = {"ok": ok, "structure": cfg.structure, "status": run.status, "detail": run.detail,
               "seed": cfg.seed, "mode": mode, "writes": len(run.trace.writes),
               "ops": len(run.trace.ops) // 2, "seconds": round(time.monotonic() - t0, 2),
               "verdicts": {k: v.to_json() for k, v in result.verdicts.items()}}
    rows = [(k, "ok" if v.ok else "FAIL", v.chain) for k, v in result.verdicts.items()]
    table = _table(rows, ("condition", "verdict", "detail")) + (
        f"\n{cfg.structure} {mode} seed={cfg.seed}: status {run.status}, "
        f"{payload['ops']} ops, {payload['writes']} writes, {payload['seconds']}s")
    _emit(cfg, payload, table)
    if cfg.out:
        with open(Path(cfg.out) / "stress-trace.jsonl", "w") as fp:
            dump_jsonl(run.trace, fp)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_check(cfg: RunConfig, path: str) -> int:
    try:
        with open(path) as fp:
            trace = load_jsonl(fp)
    except (OSError, ValueError, KeyError, TraceFault) as exc:
        print(f"cannot load trace {path}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    structure = cfg.structure or trace.meta.get("structure")
    if structure not in STRUCTURES:
        print("trace names no known structure; pass --structure", file=sys.stderr)
        return EXIT_FAULT
    mutations = tuple(cfg.mutations) or tuple(trace.meta.get("mutations", ()))
    result = battery.check_trace(trace, structure, mutations)
    payload = {"ok": result.ok, "structure": structure, "stats": result.stats,
               "verdicts": {k: v.to_json() for k, v in result.verdicts.items()}}
    rows = [(k, "ok" if v.ok else v.status.upper(), v.chain) for k, v in result.verdicts.items()]
    _emit(cfg, payload, _table(rows, ("condition", "verdict", "detail")))
    if not result.verdicts["validate"].ok:
        return EXIT_FAULT
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_scenario(cfg: RunConfig, name: str) -> int:
    run = explore.scenario(name)
    report = battery.scenario_report(name, run)
    ok = all(e.ok for e in report)
    payload = {"ok": ok, "scenario": name, "results": run.results,
               "expectations": [{"claim": e.claim, "ok": e.ok, "detail": e.detail} for e in report]}
    rows = [(e.claim, "ok" if e.ok else "FAIL", e.detail[:120]) for e in report]
    _emit(cfg, payload, _table(rows, ("expected", "verdict", "detail")))
    if cfg.out:
        with open(Path(cfg.out) / f"{name}.jsonl", "w") as fp:
            dump_jsonl(run.trace, fp)
    return EXIT_OK if ok else EXIT_VIOLATION


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig(
            subcommand=args.subcommand,
            structure=getattr(args, "structure", None),
            threads=getattr(args, "threads", None),
            ops=getattr(args, "ops", None),
            keys=getattr(args, "keys", (1, 4)),
            mutations=tuple(getattr(args, "mutate", ())),
            seed=getattr(args, "seed", 0),
            max_traces=getattr(args, "max_traces", 1_000_000),
            preemptions=(None if getattr(args, "preemptions", 2) < 0 else getattr(args, "preemptions", 2)),
            out=args.out, fmt=args.fmt, verbose=args.verbose)
        if args.subcommand == "explore":
            return cmd_explore(cfg, args.workload)
        if args.subcommand == "stress":
            return cmd_stress(cfg, args.mode)
        if args.subcommand == "check":
            return cmd_check(cfg, args.trace)
        return cmd_scenario(cfg, args.name)
    except (UsageError, FileNotFoundError) as exc:
        print(f"traverse-lab: error: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except explore.ExplosionGuard as exc:
        print(f"traverse-lab: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
