"""Abstraction functions and linearizability verdicts.

Two independent routes: effect-point checking reads the abstract state off
every concrete state of the trace; the search route only looks at the
invocation/response history and tries every linearization.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Mapping

from .checker import Verdict
from .structures.citrus import default_data
from .trace import Ref, Trace

UPDATES = ("insert", "delete")
SET_OPS = ("contains",) + UPDATES


# -- abstraction functions ----------------------------------------------------

def _list_members(state: Mapping, head: int, succ: str = "succ") -> dict:
    """Keys whose node a succ-walk for that key reaches, with the node."""
    out = {}
    highest = None
    obj, seen = head, set()
    while obj is not None and obj not in seen:
        seen.add(obj)
        key = state.get((obj, "key"))
        if highest is None or key > highest:
            out.setdefault(key, obj)
            highest = key
        nxt = state.get((obj, succ))
        obj = nxt.obj if isinstance(nxt, Ref) else None
    return out


def abstract_lazy(state: Mapping, head: int = 0) -> frozenset:
    return frozenset(k for k, o in _list_members(state, head).items()
                     if isinstance(k, int) and not state.get((o, "rem")))


abstract_lo = abstract_lazy


def bst_find(state: Mapping, root: int, k) -> int | None:
    """Node with key ``k`` reached by the binary-search walk for ``k``, if any."""
    obj, seen = root, set()
    while obj not in seen:
        seen.add(obj)
        key = state.get((obj, "key"))
        if key == k:
            return obj
        nxt = state.get((obj, "right" if key < k else "left"))
        if not isinstance(nxt, Ref):
            return None
        obj = nxt.obj
    return None


def abstract_cf(state: Mapping, keys, root: int = 0) -> frozenset:
    out = set()
    for k in keys:
        x = bst_find(state, root, k)
        if x is not None and not state.get((x, "del")):
            out.add(k)
    return frozenset(out)


def abstract_citrus(state: Mapping, keys, root: int = 0) -> frozenset:
    """The map as a frozenset of (key, data) pairs."""
    out = set()
    for k in keys:
        x = bst_find(state, root, k)
        if x is not None:
            out.add((k, state.get((x, "data"))))
    return frozenset(out)


def abstraction_for(structure: str, roots: Mapping, keys) -> Callable[[Mapping], frozenset]:
    keys = tuple(keys)
    if structure in ("lazylist", "lotree"):
        head = roots.get("head", 0)
        return lambda s: abstract_lazy(s, head)
    root = roots.get("root", 0)
    if structure == "cftree":
        return lambda s: abstract_cf(s, keys, root)
    if structure == "citrus":
        return lambda s: abstract_citrus(s, keys, root)
    raise KeyError(structure)


def trace_keys(trace: Trace) -> range:
    lo, hi = trace.key_bounds
    return range(lo - 1, hi + 2)


def _members(a: frozenset) -> dict:
    """Abstract state as a key -> data dict (data None for sets)."""
    out = {}
    for x in a:
        if isinstance(x, tuple):
            out[x[0]] = x[1]
        else:
            out[x] = None
    return out


def abstract_series(trace: Trace, abstraction: Callable) -> list[dict]:
    """Abstract state after every timestamp of the trace (index = t - start)."""
    cache_key = ("abstract", id(abstraction))
    if cache_key in trace.cache:
        return trace.cache[cache_key]
    out = []
    prev = None
    for _t, state, _w in trace.iter_states():
        cur = _members(abstraction(state))
        if cur == prev:
            cur = prev
        out.append(cur)
        prev = cur
    trace.cache[cache_key] = out
    return out


# -- effect points ------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    t: int
    kind: str  # "insert" | "delete" | "other"
    key: Any
    data: Any = None


def _transition(before: dict, after: dict, t: int) -> Transition:
    added = set(after) - set(before)
    removed = set(before) - set(after)
    changed = {k for k in set(after) & set(before) if after[k] != before[k]}
    if len(added) == 1 and not removed and not changed:
        k = added.pop()
        return Transition(t, "insert", k, after[k])
    if len(removed) == 1 and not added and not changed:
        return Transition(t, "delete", removed.pop())
    return Transition(t, "other", None)


def _data(data, key):
    return default_data(key) if data is None else data


def _is_success(kind: str, ret) -> bool:
    return kind in UPDATES and ret is True


def _max_matching(edges: dict) -> dict:
    """Bipartite matching by augmenting paths: left -> right."""
    match_r: dict = {}

    def augment(u, seen) -> bool:
        for v in edges.get(u, ()):
            if v in seen:
                continue
            seen.add(v)
            if v not in match_r or augment(match_r[v], seen):
                match_r[v] = u
                return True
        return False

    for u in edges:
        augment(u, set())
    return {u: v for v, u in match_r.items()}


def check_effect_points(trace: Trace, abstraction: Callable, decisive: frozenset | None = None,
                        semantics: str = "set") -> Verdict:
    """Witness states for reads and failed updates, one decisive transition per success."""
    verdict = Verdict("effect-points")
    series = abstract_series(trace, abstraction)
    start = trace.start

    def a(t):
        return series[t - start]

    transitions = []
    for t in range(start + 1, trace.end + 1):
        before, after = a(t - 1), a(t)
        if before is after:
            continue
        tr = _transition(before, after, t)
        label = trace.write_at(t).label
        if tr.kind == "other":
            verdict.fail(t, trace.write_at(t).loc, None, chain=f"write@{t} ({label}) changed the "
                         f"abstract state by more than one key: {before} -> {after}")
        transitions.append(tr)
        if decisive is not None and label not in decisive:
            verdict.fail(t, trace.write_at(t).loc, tr.key,
                         chain=f"non-decisive write@{t} ({label}) changed the abstract state")

    ops = {op: e for op, e in trace.op_intervals().items() if e["kind"] in SET_OPS}
    edges: dict = {}
    for op, e in sorted(ops.items()):
        if e["res"] is None:
            continue
        kind, k, ret, lo, hi = e["kind"], e["key"], e["ret"], e["inv"], e["res"]
        if _is_success(kind, ret):
            edges[op] = [i for i, tr in enumerate(transitions)
                         if tr.kind == kind and tr.key == k and lo < tr.t <= hi
                         and (kind != "insert" or semantics == "set"
                              or tr.data == _data(e["data"], k))]
            continue
        if kind == "contains":
            if semantics == "map":
                good = (lambda s: s.get(k, False) == ret) if ret is not False else (lambda s: k not in s)
            else:
                good = (lambda s: k in s) if ret else (lambda s: k not in s)
        elif kind == "insert":
            good = lambda s: k in s
        else:
            good = lambda s: k not in s
        if not any(good(a(t)) for t in range(lo, hi + 1)):
            verdict.fail(lo, None, k, hi, f"op {op} {kind}({k})->{ret!r} has no witness state "
                         f"in [{lo},{hi}]")

    matched = _max_matching(edges)
    for op in edges:
        if op not in matched:
            e = ops[op]
            verdict.fail(e["inv"], None, e["key"], e["res"],
                         f"op {op} {e['kind']}({e['key']}) succeeded without its own decisive "
                         f"transition in [{e['inv']},{e['res']}]")
    used = set(matched.values())
    for i, tr in enumerate(transitions):
        if tr.kind != "other" and i not in used:
            w = trace.write_at(tr.t)
            verdict.fail(tr.t, w.loc, tr.key, chain=f"transition@{tr.t} ({w.label}) {tr.kind} "
                         f"{tr.key} is not attributable to any successful update")
    return verdict


def check_abstraction_stability(trace: Trace, abstraction: Callable, decisive: frozenset) -> Verdict:
    verdict = Verdict("abstraction-stability")
    series = abstract_series(trace, abstraction)
    for t in range(trace.start + 1, trace.end + 1):
        i = t - trace.start
        if series[i] is not series[i - 1] and trace.write_at(t).label not in decisive:
            w = trace.write_at(t)
            verdict.fail(t, w.loc, None, chain=f"write@{t} ({w.label}) changed the abstract state")
    return verdict


# -- linearization search -----------------------------------------------------

@dataclass(frozen=True)
class HistOp:
    op: int
    kind: str
    key: Any
    data: Any
    ret: Any
    inv: int  # real-time order stamps (event sequence numbers)
    res: int


def history_of(trace: Trace) -> list[HistOp]:
    out = []
    for op, e in sorted(trace.op_intervals().items()):
        if e["kind"] in SET_OPS and e["res_seq"] is not None:
            out.append(HistOp(op, e["kind"], e["key"], e["data"], e["ret"],
                              e["inv_seq"], e["res_seq"]))
    return out


def set_spec(state: frozenset, kind: str, key, data=None):
    """Sequential set: returns (new state, return value)."""
    if kind == "contains":
        return state, key in state
    if kind == "insert":
        return (state, False) if key in state else (state | {key}, True)
    return (state - {key}, True) if key in state else (state, False)


def map_spec(state: frozenset, kind: str, key, data=None):
    """Sequential map with insert-no-overwrite; state is a frozenset of pairs."""
    current = dict(state)
    if kind == "contains":
        return state, current.get(key, False)
    if kind == "insert":
        if key in current:
            return state, False
        return state | {(key, _data(data, key))}, True
    if key in current:
        return state - {(key, current[key])}, True
    return state, False


SPECS = {"set": set_spec, "map": map_spec}


def check_linearizable_search(history: list[HistOp], spec: Callable = set_spec,
                              initial: frozenset = frozenset()) -> bool:
    """Depth-first search over linear extensions of the real-time order."""
    ops = tuple(history)
    n = len(ops)
    if n == 0:
        return True
    # a must precede b when a responded before b was invoked
    preds = [frozenset(j for j in range(n) if ops[j].res < ops[i].inv) for i in range(n)]

    @lru_cache(maxsize=None)
    def search(done: frozenset, state: frozenset) -> bool:
        if len(done) == n:
            return True
        for i in range(n):
            if i in done or not preds[i] <= done:
                continue
            o = ops[i]
            new, ret = spec(state, o.kind, o.key, o.data)
            if ret == o.ret and search(done | {i}, new):
                return True
        return False

    return search(frozenset(), frozenset(initial))


def initial_abstract(trace: Trace, abstraction: Callable) -> frozenset:
    return abstraction(trace.state_at(trace.start))
