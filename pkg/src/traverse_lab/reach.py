"""Extend relations and reachability predicates over a single state.

Every predicate here is the closure of an extend chain from a fixed start
location, so it is computed once per state as a set of reachable locations.
Weak (ghost-aware) reachability additionally takes a per-traversal view of the
ghost keys that are live at the query time.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Mapping

from .trace import Ref, Report

EPSILON = 0.5

TREE_LINKS = ("left", "right")
TREEPRED_FIELDS = ("left", "right", "pred")


class ExtendRelation:
    """extend(loc, value, next_loc) given by an exact successor function."""

    def __init__(self, name: str, param: Any, step: Callable[[Any, Any], tuple]):
        self.name = name
        self.param = param
        self._step = step

    def next(self, loc, value) -> tuple:
        return self._step(loc, value)

    def __call__(self, loc, value, loc2) -> bool:
        return tuple(loc2) in self._step(loc, value)

    def __repr__(self) -> str:
        return f"{self.name}({self.param})" if self.param is not None else self.name


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def extend_succ(k) -> ExtendRelation:
    def step(loc, v):
        o, f = loc
        if f == "key":
            return ((o, "succ"),) if _is_num(v) and v < k else ()
        if f == "succ" and isinstance(v, Ref):
            return ((v.obj, "key"),)
        return ()
    return ExtendRelation("succ_k", k, step)


def extend_plain_succ() -> ExtendRelation:
    def step(loc, v):
        o, f = loc
        if f == "key":
            return ((o, "succ"),)
        if f == "succ" and isinstance(v, Ref):
            return ((v.obj, "key"),)
        return ()
    return ExtendRelation("succ", None, step)


def extend_treepred() -> ExtendRelation:
    def step(loc, v):
        o, f = loc
        if f == "key":
            return tuple((o, g) for g in TREEPRED_FIELDS)
        if f in TREEPRED_FIELDS and isinstance(v, Ref):
            return ((v.obj, "key"),)
        return ()
    return ExtendRelation("treepred", None, step)


def extend_bst(k) -> ExtendRelation:
    def step(loc, v):
        o, f = loc
        if f == "key":
            if not _is_num(v) or v == k:
                return ()
            return ((o, "right"),) if v < k else ((o, "left"),)
        if f in TREE_LINKS and isinstance(v, Ref):
            return ((v.obj, "key"),)
        return ()
    return ExtendRelation("bst_k", k, step)


def extend_bst_eps(k) -> ExtendRelation:
    rel = extend_bst(k + EPSILON)
    rel.name, rel.param = "succ_k_eps", k
    return rel


# -- ghost views -----------------------------------------------------------

class GhostHistory:
    """Open/collapse intervals of ghost keys, indexed per object."""

    def __init__(self, events):
        # events: iterable of (t, obj, value); the first assignment on an object
        # after it is clear opens a ghost, the next one collapses it
        self.intervals: list[tuple[int, int, Any, float]] = []
        open_: dict = {}
        for t, obj, value in events:
            if obj in open_:
                t_open, v_open = open_.pop(obj)
                self.intervals.append((obj, t_open, v_open, t))
            else:
                open_[obj] = (t, value)
        for obj, (t_open, v_open) in open_.items():
            self.intervals.append((obj, t_open, v_open, float("inf")))
        self.intervals.sort(key=lambda iv: iv[1])
        self.change_points = sorted({iv[1] for iv in self.intervals}
                                    | {iv[3] for iv in self.intervals if iv[3] != float("inf")})

    @classmethod
    def of_trace(cls, trace) -> "GhostHistory":
        cached = trace.cache.get("ghosts")
        if cached is None:
            cached = trace.cache["ghosts"] = cls(trace.ghost_events())
        return cached

    def effective(self, s: int | None, t: int) -> dict:
        """obj -> ghost key for ghosts visible to a traversal started at ``s``.

        ``s=None`` sees every ghost live at ``t``.
        """
        out = {}
        for obj, t_open, value, t_collapse in self.intervals:
            if t_open > t:
                break
            if (s is None or s < t_open) and t < t_collapse:
                out[obj] = value
        return out

    def changes_at(self, t: int) -> bool:
        i = bisect.bisect_left(self.change_points, t)
        return i < len(self.change_points) and self.change_points[i] == t


@dataclass
class GhostView:
    """Effective ghost keys for one traversal (start ``s``) at query time ``t``."""

    history: GhostHistory | None
    s: int | None
    t: int

    @classmethod
    def fixed(cls, ghosts: Mapping) -> "GhostView":
        view = cls(None, None, 0)
        view._fixed = dict(ghosts)
        return view

    def mapping(self) -> dict:
        fixed = getattr(self, "_fixed", None)
        if fixed is not None:
            return fixed
        if self.history is None:
            return {}
        return self.history.effective(self.s, self.t)


# -- predicates ------------------------------------------------------------

def _chain(state: Mapping, start, step) -> set:
    seen = {start}
    todo = [start]
    while todo:
        loc = todo.pop()
        for nxt in step(loc, state.get(loc)):
            if nxt not in seen and nxt in state:
                seen.add(nxt)
                todo.append(nxt)
    return seen


class ReachPredicate:
    """Reach(loc) as the closure of an extend chain from ``start``."""

    relevant: frozenset = frozenset()
    uses_ghosts = False

    def __init__(self, name: str, k: Any, start, extend: ExtendRelation):
        self.name = name
        self.k = k
        self.start = start
        self.extend = extend

    @property
    def ident(self) -> tuple:
        return (self.name, self.k, self.start)

    def closure(self, state: Mapping, view: GhostView | None = None) -> frozenset:
        if self.start not in state:
            return frozenset()
        return frozenset(_chain(state, self.start, self.extend.next))

    def __call__(self, state: Mapping, loc, view: GhostView | None = None) -> bool:
        return tuple(loc) in self.closure(state, view)

    def __repr__(self) -> str:
        return f"{self.name}(k={self.k})" if self.k is not None else self.name


class SuccReach(ReachPredicate):
    """Plain successor-list reachability, lifted to the tree and pred fields.

    A node's left/right/pred locations count as reachable exactly when its key
    does, so single-step compatibility with the tree-and-pred walk can be
    stated location by location.
    """

    relevant = frozenset({"key", "succ"})

    def __init__(self, head: int):
        super().__init__("succ", None, (head, "key"), extend_plain_succ())

    def closure(self, state, view=None):
        base = super().closure(state)
        extra = set()
        for o, f in base:
            if f == "key":
                for g in TREEPRED_FIELDS:
                    if (o, g) in state:
                        extra.add((o, g))
        return base | frozenset(extra)


class SuccKReach(ReachPredicate):
    relevant = frozenset({"key", "succ"})

    def __init__(self, k, head: int):
        super().__init__("succ_k", k, (head, "key"), extend_succ(k))


class BstKReach(ReachPredicate):
    relevant = frozenset({"key", "left", "right"})

    def __init__(self, k, root: int):
        super().__init__("bst_k", k, (root, "key"), extend_bst(k))


class SuccKReachEps(ReachPredicate):
    relevant = frozenset({"key", "left", "right"})

    def __init__(self, k, root: int):
        super().__init__("succ_k_eps", k, (root, "key"), extend_bst_eps(k))


def weak_step(k, state: Mapping, ghosts: Mapping):
    def step(loc, v):
        o, f = loc
        if f == "key":
            if not _is_num(v):
                return ()
            g = ghosts.get(o, v)
            out = []
            if (k > g and k != v) or (k == v and g != v):
                out.append((o, "right"))
            if k < v:
                out.append((o, "left"))
            return tuple(out)
        if f in TREE_LINKS and isinstance(v, Ref):
            return ((v.obj, "key"),)
        return ()
    return step


class WeakKReach(ReachPredicate):
    """Ghost-aware k-reachability; a view supplies the effective ghost keys."""

    relevant = frozenset({"key", "left", "right"})
    uses_ghosts = True

    def __init__(self, k, root: int, view_start: int | None = None):
        super().__init__("weak_k", k, (root, "key"), extend_bst(k))
        self.view_start = view_start

    @property
    def ident(self) -> tuple:
        return (self.name, self.k, self.start, self.view_start)

    def closure(self, state, view=None):
        if self.start not in state:
            return frozenset()
        ghosts = view.mapping() if view is not None else {}
        return frozenset(_chain(state, self.start, weak_step(self.k, state, ghosts)))


# -- function-style entry points -------------------------------------------

def succ_reach(state, x, head: int = 0) -> bool:
    return SuccReach(head)(state, x)


def succ_kreach(state, x, k, head: int = 0) -> bool:
    return SuccKReach(k, head)(state, x)


def bst_kreach(state, x, k, root: int = 0) -> bool:
    return BstKReach(k, root)(state, x)


def weak_kreach(state, view: GhostView | None, x, k, root: int = 0) -> bool:
    return WeakKReach(k, root)(state, x, view)


def succ_kreach_eps(state, x, k, root: int = 0) -> bool:
    return SuccKReachEps(k, root)(state, x)


def check_compat_on_state(state: Mapping, extend: ExtendRelation, reach: ReachPredicate,
                          view: GhostView | None = None, reachable: frozenset | None = None) -> Report:
    """Single-step compatibility of ``extend`` with ``reach`` in one state."""
    r = reach.closure(state, view) if reachable is None else reachable
    for loc in sorted(r, key=repr):
        for nxt in extend.next(loc, state.get(loc)):
            if nxt in state and nxt not in r:
                return Report(False, f"{loc}={state.get(loc)!r} extends to unreachable {nxt}", (loc, nxt))
    return Report(True)


def weak_paths(state: Mapping, k, root: int, ghosts: Mapping, limit: int = 10000) -> Iterator[list]:
    """Enumerate simple weak-reach paths from the root (every prefix is yielded)."""
    step = weak_step(k, state, ghosts)
    start = (root, "key")
    stack = [[start]]
    count = 0
    while stack and count < limit:
        path = stack.pop()
        count += 1
        yield path
        for nxt in step(path[-1], state.get(path[-1])):
            if nxt in state and nxt not in path:
                stack.append(path + [nxt])


# -- registries ------------------------------------------------------------

def make_reach(name: str, k=None, roots: Mapping | None = None, view_start=None) -> ReachPredicate:
    roots = roots or {}
    if name == "succ":
        return SuccReach(roots.get("head", 0))
    if name == "succ_k":
        return SuccKReach(k, roots.get("head", 0))
    if name == "bst_k":
        return BstKReach(k, roots.get("root", 0))
    if name == "weak_k":
        return WeakKReach(k, roots.get("root", 0), view_start)
    if name == "succ_k_eps":
        return SuccKReachEps(k, roots.get("root", 0))
    raise KeyError(f"unknown reach predicate {name!r}")


def make_extend(name: str, k=None) -> ExtendRelation:
    if name == "succ":
        return extend_plain_succ()
    if name == "succ_k":
        return extend_succ(k)
    if name == "treepred":
        return extend_treepred()
    if name in ("bst_k", "weak_k"):
        return extend_bst(k)
    if name == "succ_k_eps":
        return extend_bst_eps(k)
    raise KeyError(f"unknown extend relation {name!r}")


REACH_NAMES = ("succ", "succ_k", "bst_k", "weak_k", "succ_k_eps")
EXTEND_NAMES = ("succ", "succ_k", "treepred", "bst_k", "succ_k_eps")
