import math

import pytest
from hypothesis import given, settings, strategies as st

from oracles import random_state, reachable_locations
from traverse_lab.reach import (EPSILON, GhostHistory, GhostView, WeakKReach, bst_kreach,
                                check_compat_on_state, extend_bst, extend_succ, extend_treepred,
                                make_extend, make_reach, succ_kreach, succ_kreach_eps, succ_reach,
                                weak_kreach, weak_paths)
from traverse_lab.trace import Ref

INF = math.inf


def chain(*keys):
    """Sorted list state: node i has key keys[i] and succ i+1."""
    state = {}
    for i, k in enumerate(keys):
        state[(i, "key")] = k
        state[(i, "succ")] = Ref(i + 1) if i + 1 < len(keys) else None
    return state


# -- extend relations ----------------------------------------------------------

@pytest.mark.parametrize("v,expected", [(3, True), (7, False), (5, False)])
def test_extend_succ_key_step(v, expected):
    assert extend_succ(5)(("o", "key"), v, ("o", "succ")) is expected


@pytest.mark.parametrize("k", [0, 5, 100])
def test_extend_succ_follows_links_for_any_k(k):
    assert extend_succ(k)(("o", "succ"), Ref("p"), ("p", "key"))


def test_extend_treepred():
    ext = extend_treepred()
    assert ext(("o", "key"), 42, ("o", "pred"))
    assert not ext(("o", "left"), None, ("o", "key"))
    assert not ext(("o", "left"), None, ("x", "key"))
    assert not ext(("o", "key"), 42, ("o", "succ"))
    assert not ext(("o", "succ"), Ref("p"), ("p", "key"))


def test_extend_bst():
    ext = extend_bst(5)
    assert ext(("o", "key"), 3, ("o", "right"))
    assert ext(("o", "key"), 8, ("o", "left"))
    assert not ext(("o", "key"), 3, ("o", "left"))
    for nxt in [("o", "left"), ("o", "right"), ("o", "key")]:
        assert not ext(("o", "key"), 5, nxt)


def test_eps_relation_goes_right_at_the_key():
    ext = make_extend("succ_k_eps", 5)
    assert ext(("o", "key"), 5, ("o", "right"))
    assert EPSILON == 0.5


def test_registry_rejects_unknown_names():
    with pytest.raises(KeyError):
        make_reach("teleport", 1)
    with pytest.raises(KeyError):
        make_extend("teleport", 1)


# -- predicates: hand-built states ------------------------------------------------

def test_succ_reach_initial_sentinels():
    state = chain(-INF, INF)
    assert succ_reach(state, (1, "key"))


def test_detached_node_unreachable():
    state = chain(-INF, INF)
    state[(2, "key")] = 3
    state[(2, "succ")] = Ref(1)
    assert not succ_reach(state, (2, "key"))
    assert not succ_kreach(state, (2, "key"), 3)


def test_succ_kreach_spec_list():
    state = chain(-INF, 3, 7, INF)
    # values frozen from the path-enumeration oracle
    assert succ_kreach(state, (2, "key"), 5) is True
    assert succ_kreach(state, (2, "key"), 2) is False
    assert reachable_locations(state, "succ_k", 5) == {(0, "key"), (0, "succ"), (1, "key"),
                                                       (1, "succ"), (2, "key")}


@given(st.integers(-10, 10))
def test_head_key_always_succ_k_reachable(k):
    assert succ_kreach(chain(-INF, 3, 7, INF), (0, "key"), k)


def bst(*edges, keys):
    state = {(o, "key"): k for o, k in keys.items()}
    for o in keys:
        state[(o, "left")] = None
        state[(o, "right")] = None
    for parent, side, child in edges:
        state[(parent, side)] = Ref(child)
    return state


def test_bst_root_key_always_reachable():
    state = bst(keys={0: -1})
    for k in range(-3, 4):
        assert bst_kreach(state, (0, "key"), k)


def test_bst_single_right_child():
    state = bst((0, "right", 1), keys={0: -1, 1: 7})
    assert bst_kreach(state, (1, "key"), 3)


def test_bst_left_turn_only_node():
    state = bst((0, "right", 1), (1, "left", 2), keys={0: -1, 1: 5, 2: 2})
    assert not bst_kreach(state, (2, "key"), 8)
    assert bst_kreach(state, (2, "key"), 1)


def test_eps_reach_continues_past_the_key():
    state = bst((0, "right", 1), (1, "right", 2), keys={0: -1, 1: 5, 2: 9})
    assert not bst_kreach(state, (2, "key"), 5)
    assert succ_kreach_eps(state, (2, "key"), 5)


def test_eps_detached():
    state = bst((0, "right", 1), keys={0: -1, 1: 5, 2: 9})
    assert not succ_kreach_eps(state, (2, "key"), 5)


def test_weak_equals_standard_without_ghosts():
    state = bst((0, "right", 1), (1, "left", 2), (1, "right", 3), keys={0: -1, 1: 5, 2: 2, 3: 8})
    view = GhostView.fixed({1: 5})
    for k in range(0, 10):
        for loc in state:
            assert weak_kreach(state, view, loc, k) == bst_kreach(state, loc, k)


def test_weak_reach_widens_right_subtree_of_copy():
    # copy w (key 8, ghost 5) with the original successor still in its right subtree
    state = bst((0, "right", 1), (1, "left", 2), (1, "right", 3), keys={0: -1, 1: 8, 2: 2, 3: 8})
    assert not bst_kreach(state, (3, "key"), 6)
    assert weak_kreach(state, GhostView.fixed({1: 5}), (3, "key"), 6)
    assert weak_kreach(state, GhostView.fixed({1: 5}), (3, "key"), 8)


def test_ghost_history_visibility():
    h = GhostHistory([(3, 7, 5), (9, 7, 8)])
    assert h.intervals == [(7, 3, 5, 9)]
    assert h.effective(None, 5) == {7: 5}
    assert h.effective(2, 5) == {7: 5}
    assert h.effective(4, 5) == {}      # traversal started after the open
    assert h.effective(None, 9) == {}   # collapsed
    assert h.changes_at(3) and h.changes_at(9) and not h.changes_at(4)


def test_weak_reach_predicate_reads_view_start():
    h = GhostHistory([(3, 1, 5)])
    state = bst((0, "right", 1), (1, "right", 3), keys={0: -1, 1: 8, 3: 8})
    early = WeakKReach(6, 0, view_start=1)
    late = WeakKReach(6, 0, view_start=5)
    assert early(state, (3, "key"), GhostView(h, 1, 4))
    assert not late(state, (3, "key"), GhostView(h, 5, 6))


def test_weak_paths_enumerates_prefixes():
    state = bst((0, "right", 1), keys={0: -1, 1: 5})
    paths = list(weak_paths(state, 9, 0, {}))
    assert [(0, "key")] in paths
    assert max(len(p) for p in paths) == 4


# -- compatibility ---------------------------------------------------------------

@given(st.randoms(use_true_random=False), st.integers(-1, 9))
def test_succ_k_compatible_with_its_own_relation(rng, k):
    state, _ = random_state(rng, "lazylist")
    assert check_compat_on_state(state, extend_succ(k), make_reach("succ_k", k, {"head": 0})).ok


def test_pred_link_leaving_the_list_breaks_compat():
    state = chain(-INF, 3, INF)
    for o in range(3):
        for f in ("left", "right", "pred"):
            state[(o, f)] = None
    state[(5, "key")] = 2
    state[(1, "pred")] = Ref(5)
    rep = check_compat_on_state(state, extend_treepred(), make_reach("succ", None, {"head": 0}))
    assert not rep.ok and rep.where == ((1, "pred"), (5, "key"))


# -- oracle agreement ------------------------------------------------------------

PREDICATES = {
    "lazylist": ["succ_k"],
    "lotree": ["succ", "succ_k"],
    "cftree": ["bst_k"],
    "citrus": ["bst_k", "weak_k", "succ_k_eps"],
}


@pytest.mark.parametrize("structure", sorted(PREDICATES))
@settings(max_examples=60)
@given(rng=st.randoms(use_true_random=False))
def test_evaluators_match_path_enumeration(structure, rng):
    state, ghosts = random_state(rng, structure)
    for name in PREDICATES[structure]:
        for k in ([None] if name == "succ" else range(-1, 10)):
            reach = make_reach(name, k, {"head": 0, "root": 0})
            got = reach.closure(state, GhostView.fixed(ghosts))
            assert set(got) == reachable_locations(state, name, k, 0, ghosts), (name, k)
