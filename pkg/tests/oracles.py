"""Independent reference implementations used as test oracles.

None of these share code with the package: reachability is decided by
enumerating node paths, states by folding writes from scratch, schedules by
recursion and linearizability by trying every permutation.
"""
from __future__ import annotations

import itertools
import math
import random
from functools import lru_cache

from traverse_lab.trace import Ref

NODE_FIELDS = {
    "lazylist": ("succ", "rem"),
    "lotree": ("succ", "pred", "left", "right", "rem"),
    "cftree": ("left", "right", "del"),
    "citrus": ("left", "right", "data"),
}


# -- states ------------------------------------------------------------------

def naive_state(trace, t):
    """Fold the first ``t - start`` writes onto the initial state, no snapshots."""
    state = dict(trace.initial)
    for w in trace.writes:
        if w.t > t:
            break
        state[w.loc] = w.value
    return state


def random_state(rng: random.Random, structure: str, n_nodes: int | None = None):
    """Random heap of at most 12 nodes; node 0 is the head/root.

    Links are arbitrary, so cycles, sharing and dangling subtrees all occur.
    Returns (state, ghosts) where ghosts maps some nodes to a ghost key.
    """
    n = n_nodes or rng.randint(1, 12)
    state = {}
    for o in range(n):
        if o == 0:
            key = -math.inf if structure in ("lazylist", "lotree") else -1
        elif rng.random() < 0.08:
            key = math.inf
        else:
            key = rng.randint(0, 8)
        state[(o, "key")] = key
        for f in NODE_FIELDS[structure]:
            if f in ("rem", "del"):
                state[(o, f)] = rng.random() < 0.3
            elif f == "data":
                state[(o, f)] = rng.randint(0, 99)
            elif rng.random() < 0.7:
                state[(o, f)] = Ref(rng.randrange(n))
            else:
                state[(o, f)] = None
    ghosts = {}
    if structure == "citrus":
        for o in range(1, n):
            if rng.random() < 0.25:
                ghosts[o] = rng.randint(0, 8)
    return state, ghosts


def _link(state, o, f):
    v = state.get((o, f))
    return v.obj if isinstance(v, Ref) else None


def _paths(start, moves):
    """Every simple node path from ``start``; ``moves(node)`` lists the next nodes."""
    out = []
    stack = [(start,)]
    while stack:
        path = stack.pop()
        out.append(path)
        for nxt in moves(path[-1]):
            if nxt is not None and nxt not in path:
                stack.append(path + (nxt,))
    return out


def reachable_locations(state, predicate: str, k=None, start: int = 0, ghosts=None) -> set:
    """Locations satisfying a reachability predicate, by explicit path enumeration."""
    ghosts = ghosts or {}
    key = lambda o: state[(o, "key")]
    present = lambda loc: loc in state

    if predicate in ("succ", "succ_k"):
        if predicate == "succ":
            go = lambda o: True
        else:
            go = lambda o: key(o) < k
        moves = lambda o: [_link(state, o, "succ")] if go(o) else []
        out = set()
        for path in _paths(start, moves):
            x = path[-1]
            out.add((x, "key"))
            if go(x) and present((x, "succ")):
                out.add((x, "succ"))
            if predicate == "succ":
                out.update(loc for loc in ((x, "left"), (x, "right"), (x, "pred")) if present(loc))
        return out

    if predicate in ("bst_k", "succ_k_eps", "weak_k"):
        target = k + 0.5 if predicate == "succ_k_eps" else k

        def directions(o):
            m = key(o)
            if predicate == "weak_k":
                g = ghosts.get(o, m)
                dirs = []
                if (target > g and target != m) or (target == m and g != m):
                    dirs.append("right")
                if target < m:
                    dirs.append("left")
                return dirs
            if m == target:
                return []
            return ["right"] if m < target else ["left"]

        moves = lambda o: [_link(state, o, d) for d in directions(o)]
        out = set()
        for path in _paths(start, moves):
            x = path[-1]
            out.add((x, "key"))
            out.update((x, d) for d in directions(x) if present((x, d)))
        return out
    raise KeyError(predicate)


# -- abstractions ------------------------------------------------------------

def abstract_by_definition(state, structure: str, start: int = 0):
    """Abstract set or map straight from the reachability definition."""
    keys = {v for (o, f), v in state.items() if f == "key" and isinstance(v, int)}
    pred = "succ_k" if structure in ("lazylist", "lotree") else "bst_k"
    mark = {"lazylist": "rem", "lotree": "rem", "cftree": "del"}.get(structure)
    out = set()
    for k in keys:
        reach = reachable_locations(state, pred, k, start)
        hits = [o for (o, f) in reach if f == "key" and state[(o, "key")] == k]
        for o in hits:
            if structure == "citrus":
                out.add((k, state[(o, "data")]))
            elif not state.get((o, mark)):
                out.add(k)
    return frozenset(out)


# -- schedules ---------------------------------------------------------------

def count_schedules(lengths: tuple) -> int:
    """Interleavings of straight-line threads by recursion on the next step."""
    @lru_cache(maxsize=None)
    def go(rest: tuple) -> int:
        if not any(rest):
            return 1
        return sum(go(rest[:i] + (n - 1,) + rest[i + 1:]) for i, n in enumerate(rest) if n)
    return go(tuple(lengths))


# -- linearizability ---------------------------------------------------------

def _apply(state: dict, kind, key, data, semantics):
    if kind == "contains":
        if semantics == "map":
            return state, state.get(key, False)
        return state, key in state
    if kind == "insert":
        if key in state:
            return state, False
        new = dict(state)
        new[key] = (key * 10 if data is None else data) if semantics == "map" else True
        return new, True
    if key in state:
        new = dict(state)
        del new[key]
        return new, True
    return state, False


def linearizable_by_permutation(history, semantics="set", initial=()) -> bool:
    """Try every ordering that respects real time; histories stay tiny here."""
    ops = list(history)
    init = dict(initial) if semantics == "map" else {k: True for k in initial}
    for order in itertools.permutations(range(len(ops))):
        pos = {i: n for n, i in enumerate(order)}
        if any(ops[a].res < ops[b].inv and pos[a] > pos[b]
               for a in range(len(ops)) for b in range(len(ops))):
            continue
        state, good = init, True
        for i in order:
            o = ops[i]
            state, ret = _apply(state, o.kind, o.key, o.data, semantics)
            if ret != o.ret:
                good = False
                break
        if good:
            return True
    return False
