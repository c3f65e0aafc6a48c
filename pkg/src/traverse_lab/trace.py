"""Execution traces: timestamped writes, reads, operation intervals and RCU events.

A trace starts from an initial state (the structure right after construction,
timestamp ``start``) and records every shared write with a dense timestamp.
States at any timestamp are rebuilt by replay from periodic snapshots.
"""
from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, NamedTuple, TextIO

NEG_INF = -math.inf
POS_INF = math.inf

DEFAULT_STRIDE = 256


class Ref(NamedTuple):
    """A link to an object."""

    obj: int

    def __repr__(self) -> str:
        return f"&{self.obj}"


Loc = tuple  # (object id, field name)


class TraceFault(Exception):
    """A trace was built or loaded inconsistently."""


@dataclass(frozen=True)
class Schema:
    name: str
    # field name -> kind, one of "key", "int", "bool", "link"
    fields: dict
    immutable: frozenset = frozenset()
    ghost: frozenset = frozenset()

    @property
    def links(self) -> frozenset:
        return frozenset(f for f, kind in self.fields.items() if kind == "link")


@dataclass(slots=True)
class WriteEvent:
    t: int
    thread: int
    op: int
    loc: Loc
    value: Any
    label: str
    ghost: tuple = ()


@dataclass(slots=True)
class ReadEvent:
    thread: int
    op: int
    loc: Loc
    src: int
    value: Any


@dataclass(slots=True)
class OpEvent:
    ev: str  # "inv" or "res"
    op: int
    thread: int
    kind: str
    key: Any
    data: Any = None
    ret: Any = None
    t: int = 0
    seq: int = 0


@dataclass(slots=True)
class RcuEvent:
    ev: str  # "rcu_enter" or "rcu_exit"
    thread: int
    op: int
    t: int
    seq: int = 0


@dataclass
class TraversalRecord:
    """Steps (loc, t) of one synchronization-free walk.

    ``base`` is the base timestamp when it is known at logging time; LO
    list segments leave it empty and point at the tree segment through
    ``glue`` so the checker can derive it.
    """

    op: int
    thread: int
    role: str
    key: Any
    steps: list = field(default_factory=list)
    end: Loc | None = None
    base: int | None = None
    glue: int | None = None
    start: int = 0


@dataclass
class FieldRead:
    """A read of a field of a node that a traversal reached."""

    op: int
    thread: int
    role: str
    key: Any
    node: Loc
    loc: Loc
    t: int
    value: Any
    trav: int | None = None


def snapshot_stride() -> int:
    raw = os.environ.get("TRAVERSE_LAB_SNAPSHOT_STRIDE")
    if not raw:
        return DEFAULT_STRIDE
    stride = int(raw)
    if stride < 1:
        raise ValueError("TRAVERSE_LAB_SNAPSHOT_STRIDE must be positive")
    return stride


class Trace:
    """Append-only log of one execution plus replay machinery."""

    def __init__(self, schema: Schema, initial: dict, roots: dict | None = None,
                 key_bounds: tuple = (1, 4), start: int = 0, meta: dict | None = None):
        self.schema = schema
        self.initial = dict(initial)
        self.roots = dict(roots or {})
        self.key_bounds = tuple(key_bounds)
        self.start = start
        self.meta = dict(meta or {})
        self.writes: list[WriteEvent] = []
        self.reads: list[ReadEvent] = []
        self.ops: list[OpEvent] = []
        self.rcu: list[RcuEvent] = []
        self.traversals: list[TraversalRecord] = []
        self.field_reads: list[FieldRead] = []
        self.cache: dict = {}
        self._live = dict(initial)
        self._last_write: dict = {}
        self._lock = threading.Lock()
        self._seq = 0
        self._snapshots: list | None = None
        self._stride = snapshot_stride()

    # -- recording -------------------------------------------------------

    @property
    def now(self) -> int:
        return self.start + len(self.writes)

    @property
    def end(self) -> int:
        return self.now

    def _check_field(self, loc: Loc, ghost: bool = False) -> None:
        names = self.schema.ghost if ghost else self.schema.fields
        if loc[1] not in names:
            kind = "ghost field" if ghost else "field"
            raise TraceFault(f"unknown {kind} {loc[1]!r} for schema {self.schema.name}")

    def record_write(self, thread: int, op: int, loc: Loc, value: Any, label: str,
                     ghost: Iterable = ()) -> int:
        loc = tuple(loc)
        self._check_field(loc)
        ghost = tuple((tuple(g), v) for g, v in ghost)
        for g, _ in ghost:
            self._check_field(g, ghost=True)
        with self._lock:
            t = self.start + len(self.writes) + 1
            self.writes.append(WriteEvent(t, thread, op, loc, value, label, ghost))
            self._live[loc] = value
            self._last_write[loc] = t
            self._snapshots = None
        return t

    def record_read(self, thread: int, op: int, loc: Loc) -> tuple[Any, int]:
        loc = tuple(loc)
        with self._lock:
            if loc not in self._live:
                raise TraceFault(f"read of unallocated location {loc}")
            value = self._live[loc]
            t = self.now
            self.reads.append(ReadEvent(thread, op, loc, t, value))
        return value, t

    def peek(self, loc: Loc) -> Any:
        """Current value without logging a read (setup and assertions only)."""
        return self._live.get(tuple(loc))

    def record_op(self, ev: str, op: int, thread: int, kind: str, key: Any,
                  data: Any = None, ret: Any = None) -> OpEvent:
        with self._lock:
            self._seq += 1
            event = OpEvent(ev, op, thread, kind, key, data, ret, self.now, self._seq)
            self.ops.append(event)
        return event

    def record_rcu(self, ev: str, thread: int, op: int) -> RcuEvent:
        with self._lock:
            self._seq += 1
            event = RcuEvent(ev, thread, op, self.now, self._seq)
            self.rcu.append(event)
        return event

    def add_traversal(self, record: TraversalRecord) -> int:
        with self._lock:
            self.traversals.append(record)
            return len(self.traversals) - 1

    def add_field_read(self, record: FieldRead) -> None:
        with self._lock:
            self.field_reads.append(record)

    # -- replay ----------------------------------------------------------

    def _build_snapshots(self) -> list:
        snaps = [dict(self.initial)]
        state = dict(self.initial)
        for i, w in enumerate(self.writes, 1):
            state[w.loc] = w.value
            if i % self._stride == 0:
                snaps.append(dict(state))
        return snaps

    def state_at(self, t: int) -> dict:
        if not self.start <= t <= self.end:
            raise IndexError(f"timestamp {t} outside [{self.start}, {self.end}]")
        if self._snapshots is None:
            self._snapshots = self._build_snapshots()
        n = t - self.start
        idx = min(n // self._stride, len(self._snapshots) - 1)
        state = dict(self._snapshots[idx])
        for w in self.writes[idx * self._stride:n]:
            state[w.loc] = w.value
        return state

    def iter_states(self, t_from: int | None = None, t_to: int | None = None
                    ) -> Iterator[tuple[int, dict, WriteEvent | None]]:
        """Yield (t, state, write producing it). The state dict is shared and mutated."""
        t_from = self.start if t_from is None else t_from
        t_to = self.end if t_to is None else t_to
        state = self.state_at(t_from)
        yield t_from, state, (self.write_at(t_from) if t_from > self.start else None)
        for w in self.writes[t_from - self.start:t_to - self.start]:
            state[w.loc] = w.value
            yield w.t, state, w

    def write_at(self, t: int) -> WriteEvent:
        return self.writes[t - self.start - 1]

    def locations(self) -> set:
        locs = set(self.initial)
        locs.update(w.loc for w in self.writes)
        return locs

    def ghost_events(self) -> list[tuple[int, int, Any]]:
        """(t, obj, value) for every ghost assignment, in order."""
        out = []
        for w in self.writes:
            for (obj, _f), v in w.ghost:
                out.append((w.t, obj, v))
        return out

    def op_intervals(self) -> dict:
        """op id -> dict(kind, key, data, ret, thread, inv, res, inv_seq, res_seq)."""
        table: dict = {}
        for e in self.ops:
            entry = table.setdefault(e.op, {"kind": e.kind, "key": e.key, "data": e.data,
                                            "thread": e.thread, "ret": None, "inv": None,
                                            "res": None, "inv_seq": None, "res_seq": None})
            if e.ev == "inv":
                entry["inv"], entry["inv_seq"] = e.t, e.seq
            else:
                entry["res"], entry["res_seq"], entry["ret"] = e.t, e.seq, e.ret
        return table


# -- validation ------------------------------------------------------------

@dataclass
class Report:
    ok: bool
    message: str = "OK"
    where: Any = None

    def __bool__(self) -> bool:
        return self.ok


def _value_ok(kind: str, value: Any, allocated: set) -> bool:
    if kind == "key":
        return value in (NEG_INF, POS_INF) or (isinstance(value, int) and not isinstance(value, bool))
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "link":
        return value is None or (isinstance(value, Ref) and value.obj in allocated)
    return False


def validate_trace(trace: Trace) -> Report:
    schema = trace.schema
    for i, w in enumerate(trace.writes):
        if w.t != trace.start + i + 1:
            return Report(False, f"timestamp gap at write #{i}: {w.t}", w.t)
    allocated = {loc[0] for loc in trace.initial} | {w.loc[0] for w in trace.writes}
    for loc, v in trace.initial.items():
        if loc[1] not in schema.fields or not _value_ok(schema.fields[loc[1]], v, allocated):
            return Report(False, f"ill-typed initial value {loc}={v!r}", loc)
    for w in trace.writes:
        kind = schema.fields.get(w.loc[1])
        if kind is None:
            return Report(False, f"write to unknown field {w.loc}", w.t)
        if not _value_ok(kind, w.value, allocated):
            return Report(False, f"ill-typed write {w.loc}={w.value!r}", w.t)
        if w.ghost and not schema.ghost:
            return Report(False, f"ghost assignment on schema {schema.name}", w.t)
        for g, _ in w.ghost:
            if g[1] not in schema.ghost:
                return Report(False, f"unknown ghost field {g}", w.t)
    # read coherence: sweep reads in src order over one incremental replay
    order = sorted(range(len(trace.reads)), key=lambda i: trace.reads[i].src)
    state = dict(trace.initial)
    applied = trace.start
    for i in order:
        r = trace.reads[i]
        if not trace.start <= r.src <= trace.end:
            return Report(False, f"read #{i} has src {r.src} outside the trace", i)
        while applied < r.src:
            w = trace.writes[applied - trace.start]
            state[w.loc] = w.value
            applied += 1
        if r.loc not in state or state[r.loc] != r.value or type(state[r.loc]) is not type(r.value):
            return Report(False, f"read #{i} of {r.loc} saw {r.value!r}, state has {state.get(r.loc)!r}", i)
    last: dict = {}
    for i, r in enumerate(trace.reads):
        if r.src < last.get(r.thread, trace.start):
            return Report(False, f"read #{i} goes back in time on thread {r.thread}", i)
        last[r.thread] = r.src
    intervals = trace.op_intervals()
    for entry in intervals.values():
        if entry["inv"] is None:
            return Report(False, "response without invocation", entry)
        if entry["res"] is not None and entry["res"] < entry["inv"]:
            return Report(False, "response precedes invocation", entry)
    for w in trace.writes:
        if w.op in intervals:
            e = intervals[w.op]
            if w.t <= e["inv"] or (e["res"] is not None and w.t > e["res"]):
                return Report(False, f"write at {w.t} outside its operation interval", w.t)
        elif w.op >= 0:
            return Report(False, f"write at {w.t} names unknown operation {w.op}", w.t)
    for i, r in enumerate(trace.reads):
        if r.op in intervals:
            e = intervals[r.op]
            if r.src < e["inv"] or (e["res"] is not None and r.src > e["res"]):
                return Report(False, f"read #{i} outside its operation interval", i)
        elif r.op >= 0:
            return Report(False, f"read #{i} names unknown operation {r.op}", i)
    return Report(True)


def validate_traversal(trace: Trace, traversal: TraversalRecord, extend) -> Report:
    """Check that consecutive steps follow ``extend`` given the values read."""
    steps = traversal.steps
    for i, (loc, t) in enumerate(steps):
        if i and t < steps[i - 1][1]:
            return Report(False, f"step {i} goes back in time", i)
        nxt = steps[i + 1][0] if i + 1 < len(steps) else traversal.end
        if nxt is None:
            continue
        value = trace.state_at(t).get(loc)
        if not extend(loc, value, nxt):
            return Report(False, f"step {i}: {loc}={value!r} does not extend to {nxt}", i)
    if traversal.base is not None and steps and traversal.base > steps[0][1]:
        return Report(False, "base after first read", 0)
    return Report(True)


# -- JSON lines ------------------------------------------------------------

def _enc(v: Any) -> Any:
    if isinstance(v, Ref):
        return {"ref": v.obj}
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _dec(v: Any) -> Any:
    if isinstance(v, dict) and "ref" in v:
        return Ref(v["ref"])
    if v == "inf":
        return POS_INF
    if v == "-inf":
        return NEG_INF
    return v


def _loc(raw) -> Loc:
    return (raw[0], raw[1])


def dump_jsonl(trace: Trace, fp: TextIO) -> None:
    header = {
        "ev": "header", "schema": trace.schema.name,
        "fields": trace.schema.fields, "immutable": sorted(trace.schema.immutable),
        "ghost_fields": sorted(trace.schema.ghost),
        "key_bounds": list(trace.key_bounds), "start": trace.start, "roots": trace.roots,
        "meta": trace.meta,
        "initial": [[o, f, _enc(v)] for (o, f), v in sorted(trace.initial.items(), key=str)],
    }
    lines = [header]
    # interleave by (t, seq) so the stream reads like the execution
    for w in trace.writes:
        lines.append({"ev": "w", "t": w.t, "th": w.thread, "op": w.op, "loc": list(w.loc),
                      "val": _enc(w.value), "label": w.label,
                      "ghost": [[list(g), _enc(v)] for g, v in w.ghost]})
    for r in trace.reads:
        lines.append({"ev": "r", "th": r.thread, "op": r.op, "loc": list(r.loc),
                      "src": r.src, "val": _enc(r.value)})
    for e in trace.ops:
        lines.append({"ev": e.ev, "op": e.op, "th": e.thread, "kind": e.kind, "key": e.key,
                      "data": e.data, "ret": _enc(e.ret), "t": e.t, "seq": e.seq})
    for e in trace.rcu:
        lines.append({"ev": e.ev, "th": e.thread, "op": e.op, "t": e.t, "seq": e.seq})
    for i, tr in enumerate(trace.traversals):
        lines.append({"ev": "trav", "id": i, "op": tr.op, "th": tr.thread, "role": tr.role,
                      "key": _enc(tr.key), "steps": [[list(l), t] for l, t in tr.steps],
                      "end": list(tr.end) if tr.end else None, "base": tr.base,
                      "glue": tr.glue, "start": tr.start})
    for fr in trace.field_reads:
        lines.append({"ev": "fread", "op": fr.op, "th": fr.thread, "role": fr.role,
                      "key": _enc(fr.key), "node": list(fr.node), "loc": list(fr.loc),
                      "t": fr.t, "val": _enc(fr.value), "trav": fr.trav})
    for rec in lines:
        fp.write(json.dumps(rec, sort_keys=True))
        fp.write("\n")


def load_jsonl(fp: TextIO) -> Trace:
    records = [json.loads(line) for line in fp if line.strip()]
    if not records or records[0].get("ev") != "header":
        raise TraceFault("missing header record")
    h = records[0]
    schema = Schema(h["schema"], dict(h["fields"]), frozenset(h.get("immutable", ())),
                    frozenset(h.get("ghost_fields", ())))
    initial = {(o, f): _dec(v) for o, f, v in h["initial"]}
    roots = {k: v for k, v in h.get("roots", {}).items()}
    trace = Trace(schema, initial, roots, tuple(h["key_bounds"]), h.get("start", 0), h.get("meta"))
    writes = sorted((r for r in records if r["ev"] == "w"), key=lambda r: r["t"])
    for r in writes:
        t = trace.record_write(r["th"], r["op"], _loc(r["loc"]), _dec(r["val"]), r["label"],
                               [(_loc(g), _dec(v)) for g, v in r.get("ghost", ())])
        if t != r["t"]:
            raise TraceFault(f"write timestamps not dense at {r['t']}")
    for r in records:
        ev = r["ev"]
        if ev == "r":
            trace.reads.append(ReadEvent(r["th"], r["op"], _loc(r["loc"]), r["src"], _dec(r["val"])))
        elif ev in ("inv", "res"):
            trace.ops.append(OpEvent(ev, r["op"], r["th"], r["kind"], r["key"], r.get("data"),
                                     _dec(r.get("ret")), r["t"], r.get("seq", 0)))
        elif ev in ("rcu_enter", "rcu_exit"):
            trace.rcu.append(RcuEvent(ev, r["th"], r["op"], r["t"], r.get("seq", 0)))
        elif ev == "trav":
            trace.traversals.append(TraversalRecord(
                r["op"], r["th"], r["role"], _dec(r["key"]),
                [(_loc(l), t) for l, t in r["steps"]],
                _loc(r["end"]) if r.get("end") else None, r.get("base"), r.get("glue"),
                r.get("start", 0)))
        elif ev == "fread":
            trace.field_reads.append(FieldRead(r["op"], r["th"], r["role"], _dec(r["key"]),
                                               _loc(r["node"]), _loc(r["loc"]), r["t"],
                                               _dec(r["val"]), r.get("trav")))
        elif ev not in ("header", "w"):
            raise TraceFault(f"unknown record kind {ev!r}")
    trace.ops.sort(key=lambda e: e.seq)
    trace.rcu.sort(key=lambda e: e.seq)
    trace._seq = max([e.seq for e in trace.ops] + [e.seq for e in trace.rcu] + [0])
    return trace


def dumps(trace: Trace) -> str:
    import io
    buf = io.StringIO()
    dump_jsonl(trace, buf)
    return buf.getvalue()


def loads(text: str) -> Trace:
    import io
    return load_jsonl(io.StringIO(text))
