import math

import pytest

from traverse_lab import checker as ck
from traverse_lab.reach import SuccKReach, extend_succ
from traverse_lab.trace import Ref, Schema, Trace, TraversalRecord

LIST = Schema("list", {"key": "key", "succ": "link", "rem": "bool"})
K = 3


def small_list():
    """head(-inf) -> 2 -> tail(+inf), plus a detached node 3 with key 5."""
    init = {(0, "key"): -math.inf, (0, "succ"): Ref(1), (0, "rem"): False,
            (1, "key"): 2, (1, "succ"): Ref(2), (1, "rem"): False,
            (2, "key"): math.inf, (2, "succ"): None, (2, "rem"): False,
            (3, "key"): 5, (3, "succ"): None, (3, "rem"): False}
    return Trace(LIST, init, {"head": 0})


def reach():
    return SuccKReach(K, 0)


def test_write_to_never_reachable_node_is_fine():
    tr = small_list()
    tr.record_write(0, -1, (3, "succ"), Ref(2), "fresh")
    assert ck.check_forepassed(tr, reach(), extend_succ(K)).ok
    assert ck.check_strong_forepassed(tr, reach()).ok


def test_unlink_then_pointer_to_unreachable_violates():
    tr = small_list()
    t_unlink = tr.record_write(0, -1, (0, "succ"), Ref(2), "delete:unlink")
    t_bad = tr.record_write(1, -1, (1, "succ"), Ref(3), "late-write")
    v = ck.check_forepassed(tr, reach(), extend_succ(K))
    assert not v.ok
    assert (v.t, v.loc, v.t2) == (t_unlink, (1, "succ"), t_bad)
    assert "delete:unlink" in v.chain


def test_backtracking_style_write_is_forepassed_but_not_strong():
    tr = small_list()
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    tr.record_write(0, -1, (1, "succ"), Ref(0), "backtrack")
    assert ck.check_forepassed(tr, reach(), extend_succ(K)).ok
    strong = ck.check_strong_forepassed(tr, reach())
    assert not strong.ok and {v["t2"] for v in strong.violations} == {2}


def test_strong_on_empty_span():
    tr = small_list()
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    tr.record_write(0, -1, (1, "succ"), Ref(0), "later")
    assert ck.check_strong_forepassed(tr, reach(), span=(0, 0)).ok


def test_field_never_written():
    tr = small_list()
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    assert ck.check_field_forepassed(tr, SuccKReach(2, 0), (1, "key"), (1, "rem")).ok


def test_field_marked_before_unlink():
    tr = small_list()
    tr.record_write(0, -1, (1, "rem"), True, "mark")
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    assert ck.check_field_forepassed(tr, SuccKReach(2, 0), (1, "key"), (1, "rem")).ok


def test_field_written_after_unlink():
    tr = small_list()
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    tr.record_write(0, -1, (1, "rem"), True, "mark-late")
    v = ck.check_field_forepassed(tr, SuccKReach(2, 0), (1, "key"), (1, "rem"))
    assert not v.ok and (v.t, v.t2) == (1, 2)


def test_past_holds():
    tr = small_list()
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    w = ck.past_holds(tr, reach(), (1, "key"), 0, 1)
    assert w is not None and w.t == 0
    assert ck.past_holds(tr, reach(), (1, "key"), 1, 1) is None
    assert ck.past_holds(tr, reach(), (3, "key"), 0, 1) is None


def test_value_at():
    tr = small_list()
    tr.record_write(0, -1, (1, "rem"), True, "mark")
    assert ck.value_at(tr, (1, "rem"), 0) is False
    assert ck.value_at(tr, (1, "rem"), 1) is True


def _walk(tr, locs, base=0):
    steps = []
    for loc in locs:
        _, t = tr.record_read(0, -1, loc)
        steps.append((loc, t))
    return TraversalRecord(-1, 0, "search", K, steps=steps, base=base)


def test_single_read_from_root():
    tr = small_list()
    trav = _walk(tr, [(0, "key")])
    assert ck.check_traversal_correct(tr, trav, reach()).ok


def test_traversal_needs_a_base():
    tr = small_list()
    trav = _walk(tr, [(0, "key")], base=None)
    assert ck.check_traversal_correct(tr, trav, reach()).status == "premise-failed"


def test_stale_traversal_through_bad_write():
    tr = small_list()
    trav = _walk(tr, [(0, "key"), (0, "succ"), (1, "key"), (1, "succ")])
    tr.record_write(1, -1, (0, "succ"), Ref(2), "unlink")
    tr.record_write(1, -1, (1, "succ"), Ref(3), "late-write")
    _, t = tr.record_read(0, -1, (3, "key"))
    trav.steps.append(((3, "key"), t))
    direct = ck.check_traversal_correct(tr, trav, reach())
    assert not direct.ok and direct.loc == (3, "key")
    inferred = ck.infer_traversal_correct(tr, trav, reach(), extend_succ(K))
    assert inferred.status == "premise-failed" and inferred.chain.startswith("premise (c) failed")


def test_inferred_agrees_on_clean_walk():
    tr = small_list()
    trav = _walk(tr, [(0, "key"), (0, "succ"), (1, "key"), (1, "succ"), (2, "key")])
    assert ck.infer_traversal_correct(tr, trav, reach(), extend_succ(K)).ok
    assert ck.check_traversal_correct(tr, trav, reach()).ok


def test_compat_span_flags_bad_state():
    tr = small_list()
    tr.record_write(0, -1, (1, "succ"), Ref(3), "skip")  # 2 -> 5: fine for succ_k
    assert ck.check_compat_span(tr, reach(), extend_succ(K)).ok
    from traverse_lab.reach import extend_plain_succ
    v = ck.check_compat_span(tr, reach(), extend_plain_succ())
    assert not v.ok and v.t == 0


def test_points_reachable_lemma_on_clean_trace():
    tr = small_list()
    tr.record_write(0, -1, (1, "rem"), True, "mark")
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    assert ck.check_lemma_points_reachable(tr, reach(), extend_succ(K)).ok


def test_past_reach_with_constant_field():
    tr = small_list()
    tr.record_write(0, -1, (2, "rem"), True, "noise")
    v = ck.check_past_reach_with_field(tr, SuccKReach(2, 0), (1, "key"), (1, "rem"), 0, 1)
    assert v.ok and v.t2 == 0


def test_past_reach_with_field_premise_failure():
    tr = small_list()
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    tr.record_write(0, -1, (1, "rem"), True, "mark-late")
    v = ck.check_past_reach_with_field(tr, SuccKReach(2, 0), (1, "key"), (1, "rem"), 0, 2)
    assert v.status == "premise-failed"


def test_verdict_json_shape():
    v = ck.Verdict("x").fail(1, (0, "key"), 3, 2, "boom")
    out = v.to_json()
    assert out["ok"] is False and out["loc"] == [0, "key"] and out["violations"][0]["t2"] == 2


@pytest.mark.parametrize("extend_first", [True, False])
def test_reach_table_cache_is_shared(extend_first):
    tr = small_list()
    tr.record_write(0, -1, (0, "succ"), Ref(2), "unlink")
    if extend_first:
        a = ck.reach_table(tr, reach(), extend=extend_succ(K))
        assert ck.reach_table(tr, reach()) is a
    else:
        a = ck.reach_table(tr, reach())
        assert ck.reach_table(tr, reach()) is a
    assert (1, "key") in a.at(0) and (1, "key") not in a.at(1)
