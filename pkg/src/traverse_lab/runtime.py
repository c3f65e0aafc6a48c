"""Cooperative threads over an instrumented shared memory.

Data-structure operations are generators. Every shared access or blocking
transition is yielded as an action object; a driver decides which thread runs
next and performs the action against the ``World``. Thread-local bookkeeping
(immutable-field reads, latch release, RCU exit, traversal logging) happens
directly without a scheduling point.
"""
from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .trace import FieldRead, Ref, Schema, Trace, TraversalRecord


class Livelock(Exception):
    """A restart loop exceeded its bound."""


# -- actions -----------------------------------------------------------------

class Action:
    __slots__ = ()
    kind = "?"

    def __repr__(self) -> str:
        args = ", ".join(f"{s}={getattr(self, s)!r}" for s in self.__slots__)
        return f"{type(self).__name__}({args})"


class Begin(Action):
    __slots__ = ("op", "kind_", "key", "data")
    kind = "begin"

    def __init__(self, op, kind_, key, data):
        self.op, self.kind_, self.key, self.data = op, kind_, key, data


class Read(Action):
    __slots__ = ("obj", "field")
    kind = "read"

    def __init__(self, obj, field):
        self.obj, self.field = obj, field


class Write(Action):
    __slots__ = ("obj", "field", "value", "label", "ghost")
    kind = "write"

    def __init__(self, obj, field, value, label, ghost=()):
        self.obj, self.field, self.value, self.label, self.ghost = obj, field, value, label, ghost


class Alloc(Action):
    __slots__ = ("fields", "label")
    kind = "alloc"

    def __init__(self, fields, label):
        self.fields, self.label = fields, label


class Acquire(Action):
    __slots__ = ("latch",)
    kind = "acquire"

    def __init__(self, latch):
        self.latch = latch


class TryAcquire(Action):
    __slots__ = ("latch",)
    kind = "try-acquire"

    def __init__(self, latch):
        self.latch = latch


class WaitFree(Action):
    """Block (holding nothing relevant) until a latch is released."""

    __slots__ = ("latch",)
    kind = "wait-free"

    def __init__(self, latch):
        self.latch = latch


class RcuEnter(Action):
    __slots__ = ()
    kind = "rcu-enter"


class Synchronize(Action):
    __slots__ = ()
    kind = "synchronize"


class GraceWait(Action):
    __slots__ = ("waiters",)
    kind = "grace-wait"

    def __init__(self, waiters):
        self.waiters = waiters


# -- world -------------------------------------------------------------------

class World:
    """Shared memory, latches and the RCU registry for one execution."""

    def __init__(self, schema: Schema, key_bounds=(1, 4)):
        self.schema = schema
        self.key_bounds = tuple(key_bounds)
        self.roots: dict = {}
        self.trace = Trace(schema, {}, {}, key_bounds)
        self.next_obj = 0
        self.next_op = 0
        self.latches: dict = {}
        self.rcu_in: dict = {}
        self.rcu_count: dict = {}
        self.mutex = threading.RLock()

    # construction-time helpers (no events)
    def init_object(self, **fields) -> Ref:
        obj = self.next_obj
        self.next_obj += 1
        for f in self.schema.fields:
            value = fields.get(f, _default(self.schema.fields[f]))
            self.trace.initial[(obj, f)] = value
            self.trace._live[(obj, f)] = value
        return Ref(obj)

    def rebase(self, meta: dict | None = None) -> Trace:
        """Start a fresh trace whose initial state is the current state."""
        live = dict(self.trace._live)
        self.trace = Trace(self.schema, live, self.roots, self.key_bounds, 0, meta)
        self.latches.clear()
        self.rcu_in.clear()
        return self.trace

    def find(self, key) -> int | None:
        """Object id of the first node holding ``key`` (scenario scripting)."""
        for (obj, f), v in sorted(self.trace._live.items()):
            if f == "key" and v == key:
                return obj
        return None

    def peek(self, obj, f):
        return self.trace.peek((obj, f))

    # scheduling
    def enabled(self, tid: int, a: Action) -> bool:
        k = a.kind
        if k == "acquire" or k == "wait-free":
            owner = self.latches.get(a.latch)
            return owner is None or owner == tid
        if k == "grace-wait":
            return all(self.rcu_in.get(x) != seq for x, seq in a.waiters.items())
        return True

    def perform(self, ctx: "Ctx", a: Action):
        k = a.kind
        tid = ctx.tid
        if k == "read":
            return self.trace.record_read(tid, ctx.op, (a.obj, a.field))
        if k == "write":
            self.trace.record_write(tid, ctx.op, (a.obj, a.field), a.value, a.label, a.ghost)
            return None
        if k == "alloc":
            obj = self.next_obj
            self.next_obj += 1
            for f in self.schema.fields:
                value = a.fields.get(f, _default(self.schema.fields[f]))
                self.trace.record_write(tid, ctx.op, (obj, f), value, a.label)
            return Ref(obj)
        if k == "acquire":
            self.latches[a.latch] = tid
            return None
        if k == "try-acquire":
            if self.latches.get(a.latch) is None:
                self.latches[a.latch] = tid
                return True
            return False
        if k == "begin":
            ev = self.trace.record_op("inv", a.op, tid, a.kind_, a.key, a.data)
            ctx.inv_t = ev.t
            return None
        if k == "rcu-enter":
            n = self.rcu_count.get(tid, 0) + 1
            self.rcu_count[tid] = n
            self.rcu_in[tid] = n
            return self.trace.record_rcu("rcu_enter", tid, ctx.op).t
        if k == "synchronize":
            return {x: n for x, n in self.rcu_in.items() if x != tid}
        return None

    def release(self, latch) -> None:
        with self.mutex:
            self.latches.pop(latch, None)

    def rcu_exit(self, ctx: "Ctx") -> None:
        with self.mutex:
            self.rcu_in.pop(ctx.tid, None)
            self.trace.record_rcu("rcu_exit", ctx.tid, ctx.op)

    def direct_read(self, ctx: "Ctx", obj, f):
        with self.mutex:
            return self.trace.record_read(ctx.tid, ctx.op, (obj, f))


def _default(kind: str):
    return {"bool": False, "link": None, "int": 0, "key": 0}[kind]


# -- per-thread context --------------------------------------------------------

class Walk:
    """Builds one TraversalRecord as the code reads along."""

    def __init__(self, ctx: "Ctx", role: str, key, base: int | None = None,
                 glue: int | None = None):
        self.ctx = ctx
        self.record = TraversalRecord(ctx.op, ctx.tid, role, key, [], None, base, glue,
                                      ctx.world.trace.now)
        self.index = ctx.world.trace.add_traversal(self.record)
        self._dead_end = False
        self._links = ctx.world.schema.links

    def add(self, loc, t, value) -> None:
        steps = self.record.steps
        if self._dead_end and steps and steps[-1][0] != loc:
            # a null link read is a dead end; the walk went on from elsewhere
            steps.pop()
            self._dead_end = False
        if steps and steps[-1][0] == loc:
            return
        steps.append((loc, t))
        self._dead_end = value is None and loc[1] in self._links


class Ctx:
    """Per-thread handle used by operation code (``yield from ctx.read(...)``)."""

    def __init__(self, world: World, tid: int, restart_bound: int = 8):
        self.world = world
        self.tid = tid
        self.restart_bound = restart_bound
        self.op = -1
        self.inv_t = 0
        self.held: dict = {}
        self.immutable = world.schema.immutable
        self.restarts = 0

    # memory
    def read(self, obj, f, walk: Walk | None = None):
        if f in self.immutable:
            value, t = self.world.direct_read(self, obj, f)
        else:
            value, t = yield Read(obj, f)
        if walk is not None:
            walk.add((obj, f), t, value)
        return value

    def read_field(self, obj, f, node_walk: Walk | None, role: str, key):
        """Read a field of a node a traversal reached, logging it for field checks."""
        value, t = yield Read(obj, f)
        trace = self.world.trace
        trace.add_field_read(FieldRead(self.op, self.tid, role, key, (obj, "key"), (obj, f), t,
                                       value, node_walk.index if node_walk else None))
        return value

    def write(self, obj, f, value, label: str, ghost: Iterable = ()):
        yield Write(obj, f, value, label, tuple(ghost))

    def alloc(self, label: str, **fields):
        ref = yield Alloc(fields, label)
        return ref

    # latches (reentrant per thread)
    def lock(self, obj, name: str = "lock"):
        key = (obj, name)
        if key in self.held:
            self.held[key] += 1
            return
        yield Acquire(key)
        self.held[key] = 1

    def trylock(self, obj, name: str = "lock"):
        key = (obj, name)
        if key in self.held:
            self.held[key] += 1
            return True
        ok = yield TryAcquire(key)
        if ok:
            self.held[key] = 1
        return ok

    def unlock(self, obj, name: str = "lock", force: bool = False) -> None:
        key = (obj, name)
        n = self.held.get(key, 0)
        if n <= 1 or force:
            if key in self.held:
                del self.held[key]
                self.world.release(key)
        else:
            self.held[key] = n - 1

    def unlock_all(self) -> None:
        for key in list(self.held):
            del self.held[key]
            self.world.release(key)

    def wait_free(self, obj, name: str = "lock"):
        yield WaitFree((obj, name))

    # rcu
    def rcu_read_lock(self):
        t = yield RcuEnter()
        return t

    def rcu_read_unlock(self) -> None:
        self.world.rcu_exit(self)

    def synchronize_rcu(self):
        waiters = yield Synchronize()
        if waiters:
            yield GraceWait(waiters)

    # traversal logging
    def walk(self, role: str, key, base: int | None = None, glue: int | None = None) -> Walk:
        return Walk(self, role, key, base, glue)

    def attempts(self):
        n = 0
        while True:
            if n >= self.restart_bound:
                raise Livelock(f"thread {self.tid} op {self.op} restarted {n} times")
            if n:
                self.restarts += 1
            yield n
            n += 1

    def run_op(self, struct, spec: "OpSpec"):
        with self.world.mutex:
            self.op = self.world.next_op
            self.world.next_op += 1
        yield Begin(self.op, spec.kind, spec.key, spec.data)
        method = getattr(struct, spec.kind)
        args = (spec.key,) if spec.data is None else (spec.key, spec.data)
        ret = yield from method(self, *args)
        self.unlock_all()
        self.world.trace.record_op("res", self.op, self.tid, spec.kind, spec.key, spec.data, ret)
        return ret


@dataclass(frozen=True)
class OpSpec:
    kind: str
    key: Any = None
    data: Any = None

    def to_json(self) -> list:
        return [self.kind, self.key] + ([self.data] if self.data is not None else [])

    @classmethod
    def parse(cls, raw) -> "OpSpec":
        if isinstance(raw, OpSpec):
            return raw
        if isinstance(raw, str):
            kind, _, arg = raw.partition(":")
            return cls(kind, int(arg) if arg else None)
        raw = list(raw)
        return cls(raw[0], raw[1] if len(raw) > 1 else None, raw[2] if len(raw) > 2 else None)


def thread_program(struct, ctx: Ctx, ops):
    results = []
    for spec in ops:
        results.append((yield from ctx.run_op(struct, spec)))
    return results


# -- drivers -----------------------------------------------------------------

@dataclass
class ThreadState:
    tid: int
    ctx: Ctx
    gen: Any
    pending: Action | None = None
    done: bool = False


@dataclass
class Run:
    """Outcome of one execution."""

    trace: Trace
    status: str  # "ok" | "deadlock" | "livelock"
    schedule: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    detail: str = ""


class Execution:
    """One execution of thread programs under a chooser function."""

    def __init__(self, world: World, struct, threads_ops, restart_bound: int = 8):
        self.world = world
        self.struct = struct
        self.threads: list[ThreadState] = []
        self.results: dict = {}
        for tid, ops in enumerate(threads_ops):
            ctx = Ctx(world, tid, restart_bound)
            gen = thread_program(struct, ctx, [OpSpec.parse(o) for o in ops])
            self.threads.append(ThreadState(tid, ctx, gen))
        self.current: int | None = None
        self.schedule: list = []
        for ts in self.threads:
            self._advance(ts, None)

    def _advance(self, ts: ThreadState, value) -> None:
        try:
            ts.pending = ts.gen.send(value)
        except StopIteration as stop:
            ts.done, ts.pending = True, None
            self.results[ts.tid] = stop.value

    def live(self) -> list[ThreadState]:
        return [ts for ts in self.threads if not ts.done]

    def enabled(self) -> list[int]:
        return [ts.tid for ts in self.threads
                if not ts.done and self.world.enabled(ts.tid, ts.pending)]

    def step(self, tid: int) -> None:
        ts = self.threads[tid]
        result = self.world.perform(ts.ctx, ts.pending)
        self.schedule.append(tid)
        self.current = tid
        self._advance(ts, result)

    def run(self, choose: Callable[[list, int | None], int]) -> Run:
        try:
            while True:
                if not self.live():
                    return self._finish("ok")
                enabled = self.enabled()
                if not enabled:
                    blocked = {ts.tid: repr(ts.pending) for ts in self.live()}
                    return self._finish("deadlock", f"blocked: {blocked}")
                self.step(choose(enabled, self.current))
        except Livelock as exc:
            return self._finish("livelock", str(exc))

    def _finish(self, status: str, detail: str = "") -> Run:
        return Run(self.world.trace, status, list(self.schedule), dict(self.results), detail)


def run_sequential(world: World, struct, ops, tid: int = 0, restart_bound: int = 8) -> list:
    ex = Execution(world, struct, [ops], restart_bound)
    run = ex.run(lambda enabled, cur: enabled[0])
    if run.status != "ok":
        raise RuntimeError(f"sequential run ended with {run.status}: {run.detail}")
    return run.results[0]


def random_chooser(seed: int) -> Callable:
    rng = random.Random(seed)
    return lambda enabled, current: rng.choice(enabled)


def run_free(execution: Execution, seed: int, yield_prob: float = 0.3,
             timeout: float = 60.0) -> Run:
    """Drive each logical thread from its own OS thread.

    Actions are performed under the world's mutex, so the trace order is the
    real order in which they took effect; interleavings depend on the OS.
    """
    world = execution.world
    cond = threading.Condition(world.mutex)
    failure: list = []
    deadline = time.monotonic() + timeout

    def worker(ts: ThreadState) -> None:
        rng = random.Random(seed * 1000003 + ts.tid)
        try:
            while not ts.done:
                with cond:
                    while not world.enabled(ts.tid, ts.pending):
                        if time.monotonic() > deadline:
                            raise TimeoutError(f"thread {ts.tid} stuck on {ts.pending!r}")
                        cond.wait(0.01)
                    result = world.perform(ts.ctx, ts.pending)
                    execution.schedule.append(ts.tid)
                    execution._advance(ts, result)
                    cond.notify_all()
                if rng.random() < yield_prob:
                    time.sleep(0)
        except Exception as exc:  # reported through the Run
            failure.append(exc)
            with cond:
                ts.done = True
                cond.notify_all()

    # releases happen outside perform; wake waiters periodically via the timeout
    workers = [threading.Thread(target=worker, args=(ts,), daemon=True) for ts in execution.threads]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    if failure:
        status = "livelock" if isinstance(failure[0], Livelock) else "deadlock"
        return execution._finish(status, str(failure[0]))
    return execution._finish("ok")
