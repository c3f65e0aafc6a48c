"""Offline checks of traversal correctness and the forepassed family of conditions.

Every check runs over a completed trace. Reachable-location sets are computed
once per (predicate, span) in a ``ReachTable`` and shared through the trace's
cache, so running many checks over one trace stays cheap.
"""
from __future__ import annotations

import bisect
from dataclasses import asdict, dataclass, field
from typing import Any

from .reach import (ExtendRelation, GhostHistory, GhostView, ReachPredicate,
                    check_compat_on_state)
from .trace import Trace, TraversalRecord


@dataclass
class Verdict:
    condition: str
    status: str = "ok"  # "ok" | "violation" | "premise-failed"
    t: int | None = None
    loc: Any = None
    key: Any = None
    t2: int | None = None
    chain: str = ""
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def __bool__(self) -> bool:
        return self.ok

    def fail(self, t=None, loc=None, key=None, t2=None, chain="", status="violation") -> "Verdict":
        if self.status == "ok":
            self.status, self.t, self.loc, self.key, self.t2, self.chain = status, t, loc, key, t2, chain
        self.violations.append({"t": t, "loc": loc, "key": key, "t2": t2, "chain": chain})
        return self

    def to_json(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        out["loc"] = list(self.loc) if isinstance(self.loc, tuple) else self.loc
        for v in out["violations"]:
            if isinstance(v["loc"], tuple):
                v["loc"] = list(v["loc"])
        return out


@dataclass(frozen=True)
class PastWitness:
    loc: Any
    key: Any
    t: int
    lo: int
    hi: int


# -- shared indexes ---------------------------------------------------------

def writes_by_loc(trace: Trace) -> dict:
    idx = trace.cache.get("writes_by_loc")
    if idx is None:
        idx = {}
        for w in trace.writes:
            idx.setdefault(w.loc, []).append(w.t)
        trace.cache["writes_by_loc"] = idx
    return idx


def value_at(trace: Trace, loc, t: int):
    times = writes_by_loc(trace).get(loc)
    if not times:
        return trace.initial.get(loc)
    i = bisect.bisect_right(times, t)
    if i == 0:
        return trace.initial.get(loc)
    return trace.write_at(times[i - 1]).value


class ReachTable:
    """Reachable sets (and optionally per-state compatibility) over a span."""

    def __init__(self, trace: Trace, pred: ReachPredicate, t_from: int, t_to: int,
                 extend: ExtendRelation | None = None):
        self.pred = pred
        self.t_from, self.t_to = t_from, t_to
        self.sets: list[frozenset] = []
        self.compat: list[bool] | None = [] if extend is not None else None
        history = GhostHistory.of_trace(trace) if pred.uses_ghosts else None
        view_start = getattr(pred, "view_start", None)
        prev = None
        prev_ok = True
        for t, state, w in trace.iter_states(t_from, t_to):
            recompute = prev is None
            touched = False
            if not recompute and w is not None:
                touched = w.loc in prev
                if touched and w.loc[1] in pred.relevant:
                    recompute = True
            if not recompute and history is not None and history.changes_at(t):
                recompute = True
            if recompute:
                view = GhostView(history, view_start, t) if history is not None else None
                cur = pred.closure(state, view)
                if prev is not None and cur == prev:
                    cur = prev
            else:
                cur = prev
            if extend is not None:
                if recompute or touched:
                    prev_ok = bool(check_compat_on_state(state, extend, pred, reachable=cur))
                self.compat.append(prev_ok)
            self.sets.append(cur)
            prev = cur

    def at(self, t: int) -> frozenset:
        return self.sets[t - self.t_from]

    def holds(self, loc, t: int) -> bool:
        return loc in self.sets[t - self.t_from]

    def first(self, loc, lo: int, hi: int) -> int | None:
        for t in range(max(lo, self.t_from), min(hi, self.t_to) + 1):
            if loc in self.sets[t - self.t_from]:
                return t
        return None


def reach_table(trace: Trace, pred: ReachPredicate, t_from: int | None = None,
                t_to: int | None = None, extend: ExtendRelation | None = None) -> ReachTable:
    """Cached table; views of weak predicates start at their view start."""
    if t_from is None:
        t_from = getattr(pred, "view_start", None) or trace.start
        t_from = max(t_from, trace.start)
    t_to = trace.end if t_to is None else t_to
    key = ("table", pred.ident, t_from, t_to, repr(extend) if extend is not None else None)
    table = trace.cache.get(key)
    if table is None:
        # a full-span table with compat also serves requests without compat
        wider = trace.cache.get(("table", pred.ident, t_from, t_to, repr(pred.extend)))
        if extend is None and wider is not None:
            return wider
        table = trace.cache[key] = ReachTable(trace, pred, t_from, t_to, extend)
    return table


def _span(trace: Trace, span) -> tuple[int, int]:
    if span is None:
        return trace.start, trace.end
    return span


def _table_for_span(trace, reach, lo, hi, extend=None):
    view_start = getattr(reach, "view_start", None)
    t_from = trace.start if view_start is None else max(view_start, trace.start)
    if lo < t_from:
        return reach_table(trace, reach, lo, trace.end, extend)
    return reach_table(trace, reach, t_from, None, extend)


# -- operations -------------------------------------------------------------

def past_holds(trace: Trace, reach: ReachPredicate, loc, t: int, t2: int) -> PastWitness | None:
    loc = tuple(loc)
    table = _table_for_span(trace, reach, t, t2)
    found = table.first(loc, t, t2)
    return None if found is None else PastWitness(loc, reach.k, found, t, t2)


def _reductions(table: ReachTable, lo: int, hi: int):
    for t in range(max(lo + 1, table.t_from + 1), hi + 1):
        before, after = table.at(t - 1), table.at(t)
        if before is not after:
            lost = before - after
            if lost:
                yield t, lost


def check_forepassed(trace: Trace, reach: ReachPredicate, extend: ExtendRelation,
                     span=None, limit: int = 20) -> Verdict:
    lo, hi = _span(trace, span)
    verdict = Verdict("forepassed", key=None)
    table = _table_for_span(trace, reach, lo, hi)
    by_loc = writes_by_loc(trace)
    for t, lost in _reductions(table, lo, hi):
        for loc in sorted(lost, key=repr):
            times = by_loc.get(loc, ())
            i = bisect.bisect_left(times, t)
            for t2 in times[i:]:
                if t2 > hi:
                    break
                value = trace.write_at(t2).value
                for nxt in extend.next(loc, value):
                    if table.first(nxt, t - 1, t2) is None:
                        verdict.fail(t, loc, reach.k, t2,
                                     f"write@{t} ({trace.write_at(t).label}) reduced {loc}; "
                                     f"write@{t2} ({trace.write_at(t2).label}) points to {nxt}, "
                                     f"unreachable in [{t - 1},{t2}]")
                        if len(verdict.violations) >= limit:
                            return verdict
    return verdict


def check_strong_forepassed(trace: Trace, reach: ReachPredicate, span=None,
                            limit: int = 50) -> Verdict:
    lo, hi = _span(trace, span)
    verdict = Verdict("strong-forepassed")
    table = _table_for_span(trace, reach, lo, hi)
    by_loc = writes_by_loc(trace)
    for t, lost in _reductions(table, lo, hi):
        for loc in sorted(lost, key=repr):
            times = by_loc.get(loc, ())
            i = bisect.bisect_left(times, t)
            for t2 in times[i:]:
                if t2 > hi:
                    break
                verdict.fail(t, loc, reach.k, t2,
                             f"write@{t} ({trace.write_at(t).label}) reduced {loc}; "
                             f"later write@{t2} ({trace.write_at(t2).label})")
                if len(verdict.violations) >= limit:
                    return verdict
    return verdict


def check_field_forepassed(trace: Trace, reach: ReachPredicate, loc, f, span=None) -> Verdict:
    lo, hi = _span(trace, span)
    loc, f = tuple(loc), tuple(f)
    verdict = Verdict("field-forepassed")
    table = _table_for_span(trace, reach, lo, hi)
    times = writes_by_loc(trace).get(f, ())
    for t, lost in _reductions(table, lo, hi):
        if loc in lost:
            i = bisect.bisect_left(times, t)
            if i < len(times) and times[i] <= hi:
                return verdict.fail(t, loc, reach.k, times[i],
                                    f"reach of {loc} reduced at {t}, field {f} written at {times[i]}")
    return verdict


def resolve_base(trace: Trace, traversal: TraversalRecord, glue_reach=None) -> int | None:
    """Base timestamp of a traversal, deriving glued bases from the earlier segment."""
    if traversal.base is not None:
        return traversal.base
    if traversal.glue is None or not traversal.steps:
        return None
    first = trace.traversals[traversal.glue]
    lo = first.base if first.base is not None else first.start
    hi = traversal.steps[0][1]
    if glue_reach is None:
        return None
    w = past_holds(trace, glue_reach, traversal.steps[0][0], lo, hi)
    return None if w is None else w.t


def _targets(traversal: TraversalRecord) -> list:
    steps = traversal.steps
    out = []
    for i, (_loc, t) in enumerate(steps):
        nxt = steps[i + 1][0] if i + 1 < len(steps) else traversal.end
        if nxt is not None:
            out.append((nxt, t))
    return out


def check_traversal_correct(trace: Trace, traversal: TraversalRecord, reach: ReachPredicate,
                            base: int | None = None) -> Verdict:
    verdict = Verdict("traversal-correct", key=reach.k)
    if not traversal.steps:
        return verdict
    base = traversal.base if base is None else base
    if base is None:
        return verdict.fail(chain="no base timestamp", status="premise-failed")
    table = _table_for_span(trace, reach, base, trace.end)
    first = traversal.steps[0][0]
    if not table.holds(first, base):
        return verdict.fail(base, first, reach.k, None, f"{first} not reachable at base {base}")
    for nxt, t in _targets(traversal):
        if table.first(nxt, base, t) is None:
            return verdict.fail(t, nxt, reach.k, base,
                                f"{nxt} never reachable in [{base},{t}]")
    return verdict


def infer_traversal_correct(trace: Trace, traversal: TraversalRecord, reach: ReachPredicate,
                            extend: ExtendRelation, base: int | None = None) -> Verdict:
    """Evaluate the premises that make a traversal correct without looking at its steps' reach."""
    verdict = Verdict("inferred-correct", key=reach.k)
    if not traversal.steps:
        return verdict
    base = traversal.base if base is None else base
    if base is None:
        return verdict.fail(chain="no base timestamp", status="premise-failed")
    t_last = traversal.steps[-1][1]
    table = _table_for_span(trace, reach, base, trace.end, extend)
    first = traversal.steps[0][0]
    if not table.holds(first, base):
        return verdict.fail(base, first, reach.k, chain="premise (a) failed: base reach",
                            status="premise-failed")
    for t in range(base, t_last + 1):
        if not table.compat[t - table.t_from]:
            return verdict.fail(t, None, reach.k, chain="premise (b) failed: compatibility",
                                status="premise-failed")
    fp = check_forepassed(trace, reach, extend, (base, t_last), limit=1)
    if not fp.ok:
        return verdict.fail(fp.t, fp.loc, reach.k, fp.t2,
                            chain="premise (c) failed: " + fp.chain, status="premise-failed")
    return verdict


def check_compat_span(trace: Trace, reach: ReachPredicate, extend: ExtendRelation,
                      span=None) -> Verdict:
    lo, hi = _span(trace, span)
    verdict = Verdict("compat", key=reach.k)
    table = _table_for_span(trace, reach, lo, hi, extend)
    for t in range(max(lo, table.t_from), hi + 1):
        if not table.compat[t - table.t_from]:
            state = trace.state_at(t)
            rep = check_compat_on_state(state, extend, reach, reachable=table.at(t))
            return verdict.fail(t, rep.where, reach.k, chain=rep.message)
    return verdict


def check_lemma_points_reachable(trace: Trace, reach: ReachPredicate,
                                 extend: ExtendRelation) -> Verdict:
    """Once reachable, a location only ever points at locations reachable by then."""
    verdict = Verdict("points-reachable", key=reach.k)
    table = _table_for_span(trace, reach, trace.start, trace.end)
    first: dict = {}
    for t in range(table.t_from, table.t_to + 1):
        cur = table.at(t)
        if t == table.t_from or cur is not table.at(t - 1):
            for loc in cur:
                first.setdefault(loc, t)
    by_loc = writes_by_loc(trace)
    for loc, f in sorted(first.items(), key=lambda kv: (kv[1], repr(kv[0]))):
        moments = [f] + [t for t in by_loc.get(loc, ()) if t > f]
        for t2 in moments:
            value = value_at(trace, loc, t2)
            for nxt in extend.next(loc, value):
                g = first.get(nxt)
                if g is None or g > t2:
                    return verdict.fail(f, loc, reach.k, t2,
                                        f"{loc} reachable at {f} points to {nxt} at {t2}, "
                                        f"not reachable by then")
    return verdict


def check_past_reach_with_field(trace: Trace, reach: ReachPredicate, loc, f, t: int,
                                t2: int) -> Verdict:
    """Past reachability paired with a field value read later."""
    loc, f = tuple(loc), tuple(f)
    verdict = Verdict("past-reach-with-field", key=reach.k)
    table = _table_for_span(trace, reach, t, t2)
    if not table.holds(loc, t):
        return verdict.fail(t, loc, reach.k, chain=f"{loc} not reachable at {t}",
                            status="premise-failed")
    fp = check_field_forepassed(trace, reach, loc, f, (t, t2))
    if not fp.ok:
        return verdict.fail(fp.t, loc, reach.k, fp.t2, chain="premise failed: " + fp.chain,
                            status="premise-failed")
    v = value_at(trace, f, t2)
    for t3 in range(t, t2 + 1):
        if table.holds(loc, t3) and value_at(trace, f, t3) == v:
            verdict.t2 = t3
            return verdict
    return verdict.fail(t, loc, reach.k, t2, f"no state in [{t},{t2}] with {loc} reachable and {f}={v!r}")
