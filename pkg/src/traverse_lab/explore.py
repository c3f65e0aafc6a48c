"""Trace generation: bounded exhaustive schedules, seeded stress, scripted scenarios."""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

from .runtime import Execution, Livelock, OpSpec, Run, World, run_free, run_sequential
from .structures import STRUCTURES
from .trace import Trace, _enc


@dataclass
class Workload:
    structure: str
    threads: list  # per-thread op lists, e.g. [["insert:1", "contains:2"], ["rotate:3"]]
    mutations: tuple = ()
    setup: list = field(default_factory=list)  # sequential ops folded into the initial state
    keys: tuple = (1, 4)
    restart_bound: int = 8
    name: str = ""

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        if not self.threads:
            raise ValueError("a workload needs at least one thread")
        self.mutations = tuple(self.mutations)
        self.keys = tuple(self.keys)

    @property
    def n_ops(self) -> int:
        return sum(len(ops) for ops in self.threads)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, raw: dict) -> "Workload":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in raw.items() if k in known})


@dataclass
class SchedulePoint:
    index: int
    runnable: tuple
    chosen: int


def build(workload: Workload) -> Execution:
    """Fresh world with the setup ops applied and a trace that starts after them."""
    cls = STRUCTURES[workload.structure]
    world = World(cls.schema, workload.keys)
    struct = cls(world, workload.mutations)
    if workload.setup:
        run_sequential(world, struct, workload.setup, restart_bound=10_000)
    world.rebase({"structure": workload.structure, "workload": workload.name,
                  "mutations": list(workload.mutations)})
    return Execution(world, struct, workload.threads, workload.restart_bound)


def drive(ex: Execution, choose: Callable[[list, int | None], int]) -> Run:
    """Like ``Execution.run`` but leaves the choice list to the caller."""
    try:
        while True:
            if not ex.live():
                return ex._finish("ok")
            enabled = ex.enabled()
            if not enabled:
                blocked = {ts.tid: repr(ts.pending) for ts in ex.live()}
                return ex._finish("deadlock", f"blocked: {blocked}")
            ex.step(choose(enabled, ex.current))
    except Livelock as exc:
        return ex._finish("livelock", str(exc))


# -- exhaustive exploration ----------------------------------------------------

class ExplosionGuard(RuntimeError):
    """More schedules than the configured maximum."""


@dataclass
class _Node:
    cands: list
    idx: int = 0


def _candidates(enabled: list, current, preempts: int, bound: int | None) -> list:
    if current is None or current not in enabled:
        return list(enabled)
    if bound is not None and preempts >= bound:
        return [current]
    return [current] + [t for t in enabled if t != current]


def run_exhaustive(workload: Workload, preemption_bound: int | None = 2,
                   max_traces: int = 1_000_000) -> Iterator[Run]:
    """Depth-first enumeration of schedules, replaying the prefix for every run.

    ``preemption_bound`` limits switches away from a thread that could have
    continued; ``None`` enumerates every interleaving.
    """
    path: list[_Node] = []
    count = 0
    while True:
        ex = build(workload)
        depth = 0
        preempts = 0

        def choose(enabled, current):
            nonlocal depth, preempts
            if depth < len(path):
                node = path[depth]
            else:
                node = _Node(_candidates(enabled, current, preempts, preemption_bound))
                path.append(node)
            tid = node.cands[node.idx]
            if current is not None and current in enabled and tid != current:
                preempts += 1
            depth += 1
            return tid

        run = drive(ex, choose)
        del path[depth:]
        count += 1
        yield run
        while path and path[-1].idx + 1 >= len(path[-1].cands):
            path.pop()
        if not path:
            return
        if count >= max_traces:
            raise ExplosionGuard(f"more than {max_traces} schedules for {workload.name or workload}")
        path[-1].idx += 1


def count_interleavings(lengths: list[int]) -> int:
    """Number of interleavings of independent straight-line threads (multinomial)."""
    from math import comb
    total, out = 0, 1
    for n in lengths:
        total += n
        out *= comb(total, n)
    return out


def trace_signature(trace: Trace) -> str:
    """Digest of everything the checkers look at; equal digests check identically.

    Reads are grouped per thread, so schedules that only reorder reads between
    threads collapse to one signature.
    """
    h = hashlib.sha1()
    for w in trace.writes:
        h.update(repr((w.thread, w.op, w.loc, _enc(w.value), w.label, w.ghost)).encode())
    h.update(b"|ops")
    for e in trace.ops:
        h.update(repr((e.ev, e.op, e.t, e.ret)).encode())
    h.update(b"|rcu")
    for e in trace.rcu:
        h.update(repr((e.ev, e.thread, e.t)).encode())
    per_thread: dict = {}
    for r in trace.reads:
        per_thread.setdefault(r.thread, []).append((r.loc, r.src))
    h.update(repr(sorted(per_thread.items())).encode())
    for tr in trace.traversals:
        h.update(repr((tr.op, tr.role, tr.key, tr.steps, tr.base, tr.glue, tr.start)).encode())
    for fr in trace.field_reads:
        h.update(repr((fr.op, fr.loc, fr.t, fr.trav)).encode())
    return h.hexdigest()


# -- stress -----------------------------------------------------------------

def random_workload(structure: str, threads: int = 4, ops: int = 200, keys=(1, 4),
                    seed: int = 0, maintenance: float = 0.1, setup_keys: int = 2) -> Workload:
    rng = random.Random(seed)
    cls = STRUCTURES[structure]
    lo, hi = keys
    kinds = ["contains", "insert", "delete"]
    per_thread = []
    for _ in range(threads):
        prog = []
        for _ in range(ops):
            k = rng.randint(lo, hi)
            if cls.maintenance and rng.random() < maintenance:
                prog.append(f"{rng.choice(cls.maintenance)}:{k}")
            else:
                prog.append(f"{rng.choice(kinds)}:{k}")
        per_thread.append(prog)
    setup = [f"insert:{k}" for k in rng.sample(range(lo, hi + 1), min(setup_keys, hi - lo + 1))]
    return Workload(structure, per_thread, setup=setup, keys=keys, restart_bound=100_000,
                    name=f"stress-{structure}-{seed}")


def run_stress(workload: Workload, seed: int = 0, mode: str = "replay",
               yield_prob: float = 0.3, timeout: float = 120.0) -> Run:
    """Replay mode picks every step with a seeded RNG (deterministic); free mode uses OS threads."""
    ex = build(workload)
    if mode == "replay":
        rng = random.Random(seed)
        return drive(ex, lambda enabled, current: rng.choice(enabled))
    if mode == "free":
        return run_free(ex, seed, yield_prob, timeout)
    raise ValueError(f"unknown stress mode {mode!r}")


# -- mutations ---------------------------------------------------------------

MUTATIONS: dict[str, tuple[str, str]] = {}


def register_mutation(name: str, structure: str, description: str) -> None:
    cls = STRUCTURES[structure]
    cls.mutations_known = frozenset(cls.mutations_known | {name})
    MUTATIONS[name] = (structure, description)


register_mutation("orig-insert-order", "lotree",
                  "insert links the tree and pred before publishing through succ")
register_mutation("skip-mark", "lotree", "delete unlinks without setting rem")
register_mutation("no-grace-period", "citrus", "delete skips synchronize_rcu")


# -- scripted scenarios -------------------------------------------------------

@dataclass
class Step:
    """Run ``tid`` until ``stop`` holds for its pending action (or it finishes)."""

    tid: int
    stop: Callable | None = None
    label: str = ""


def reads(obj_key, field_name) -> Callable:
    """Stop predicate: the thread is about to read ``field_name`` of the node with key."""
    def stop(action, world):
        if action is None or action.kind != "read" or action.field != field_name:
            return False
        return world.peek(action.obj, "key") == obj_key
    return stop


def kind_is(kind: str) -> Callable:
    return lambda action, world: action is not None and action.kind == kind


def run_script(ex: Execution, steps: list[Step]) -> Run:
    try:
        for step in steps:
            ts = ex.threads[step.tid]
            while not ts.done:
                if step.stop is not None and step.stop(ts.pending, ex.world):
                    break
                if not ex.world.enabled(ts.tid, ts.pending):
                    return ex._finish("deadlock", f"script step {step.label or step.tid} blocked "
                                                  f"on {ts.pending!r}")
                ex.step(ts.tid)
        return drive(ex, lambda enabled, current: enabled[0])
    except Livelock as exc:
        return ex._finish("livelock", str(exc))


SCENARIOS: dict[str, Callable[[], tuple[Workload, list[Step]]]] = {}


def scenario_def(name):
    def deco(fn):
        SCENARIOS[name] = fn
        return fn
    return deco


@scenario_def("lo-rotation-recovery")
def _lo_rotation():
    """A rotation moves the node a search stands on; the search recovers via pred links."""
    wl = Workload("lotree", [["contains:1"], ["rotate:3"]], setup=["insert:3", "insert:2", "insert:1"],
                  name="lo-rotation-recovery")
    return wl, [Step(0, reads(2, "left"), "search stops at node 2"),
                Step(1, None, "rotate at 3"), Step(0, None, "search resumes")]


@scenario_def("cf-backtrack")
def _cf_backtrack():
    """A search standing on a removed node follows the backtracking link to the parent."""
    wl = Workload("cftree", [["contains:4"], ["remove_right:3"]],
                  setup=["insert:2", "insert:3", "insert:4", "delete:3"], name="cf-backtrack")
    return wl, [Step(0, reads(3, "right"), "search stops at node 3"),
                Step(1, None, "remove node 3"), Step(0, None, "search resumes")]


@scenario_def("citrus-weakreach")
def _citrus_weak():
    """Two successor-copy removals let a stale search reach a node no search for its key can."""
    setup = [f"insert:{k}" for k in (10, 5, 30, 20, 17, 15, 25)]
    wl = Workload("citrus", [["contains:13"], ["delete:10"], ["delete:20"]], setup=setup,
                  keys=(1, 40), name="citrus-weakreach")
    return wl, [Step(0, reads(10, "right"), "search stops at node 10"),
                Step(1, kind_is("grace-wait"), "delete(10) waits for the grace period"),
                Step(2, kind_is("grace-wait"), "delete(20) waits for the grace period"),
                Step(0, None, "search resumes and finishes"),
                Step(1, None), Step(2, None)]


def scenario(name: str) -> Run:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}")
    wl, steps = SCENARIOS[name]()
    return run_script(build(wl), steps)


# -- sweep definitions ---------------------------------------------------------

def sweep_workloads(structure: str) -> list[Workload]:
    """Desk-scale workloads: 2-3 threads, at most 2 ops each, keys 1..4."""
    S = structure
    out: list[Workload] = []

    def add(name, threads, setup=(), mutations=()):
        out.append(Workload(S, threads, tuple(mutations), list(setup), name=f"{S}:{name}"))

    add("ins-ins-same", [["insert:2"], ["insert:2"]])
    add("ins-del-same", [["insert:2"], ["delete:2"]], setup=["insert:2"] if S != "lazylist" else [])
    add("ins-contains", [["insert:2", "contains:3"], ["contains:2", "insert:3"]])
    add("del-del-adjacent", [["delete:2"], ["delete:3"]], setup=["insert:2", "insert:3"])
    add("del-ins-between", [["delete:2", "contains:2"], ["insert:3"]], setup=["insert:2", "insert:4"])
    add("three-mixed", [["insert:1"], ["delete:2"], ["contains:1", "contains:2"]],
        setup=["insert:2"])
    if S == "lotree":
        add("two-children-del", [["delete:2"], ["contains:3", "insert:1"]],
            setup=["insert:3", "insert:2", "insert:4", "insert:1"])
        add("rotate-contains", [["rotate:3"], ["contains:1", "delete:1"]],
            setup=["insert:3", "insert:2", "insert:1"])
        add("rotate-insert", [["rotate:4"], ["insert:1"], ["contains:2"]],
            setup=["insert:4", "insert:3", "insert:2"])
    if S == "cftree":
        add("remove-right", [["remove_right:3"], ["contains:4", "insert:3"]],
            setup=["insert:2", "insert:3", "insert:4", "delete:3"])
        add("rotate-contains", [["rotate:3"], ["contains:1", "delete:2"]],
            setup=["insert:3", "insert:2", "insert:1"])
        add("remove-insert", [["remove_right:2"], ["insert:4"], ["contains:4"]],
            setup=["insert:1", "insert:2", "insert:4", "delete:2"])
    if S == "citrus":
        add("two-children-del", [["delete:2"], ["contains:3", "contains:4"]],
            setup=["insert:2", "insert:1", "insert:3", "insert:4"])
        add("two-children-ins", [["delete:2"], ["insert:2", "contains:2"]],
            setup=["insert:2", "insert:1", "insert:4", "insert:3"])
        add("two-deletes", [["delete:2"], ["delete:3"], ["contains:3"]],
            setup=["insert:2", "insert:1", "insert:3", "insert:4"])
        add("gap-insert", [["delete:2"], ["insert:3", "contains:3"]],
            setup=["insert:2", "insert:1", "insert:4"])
    return out


def mutation_workloads(mutation: str) -> list[Workload]:
    structure = MUTATIONS[mutation][0]
    if mutation == "orig-insert-order":
        threads = [["insert:2"], ["contains:2"]]
        setup = ["insert:3"]
    elif mutation == "skip-mark":
        threads = [["delete:2"], ["insert:3"]]
        setup = ["insert:2", "insert:4"]
    else:
        threads = [["delete:2"], ["contains:4"]]
        setup = ["insert:2", "insert:1", "insert:3", "insert:4"]
    return [Workload(structure, threads, (mutation,), setup, name=f"{structure}:{mutation}")]


def load_workload(path: str) -> Workload:
    with open(path) as fp:
        return Workload.from_json(json.load(fp))


def op_list(ops) -> list[OpSpec]:
    return [OpSpec.parse(o) for o in ops]
