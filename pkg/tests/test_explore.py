import json

import pytest

from oracles import count_schedules
from traverse_lab import explore
from traverse_lab.explore import (ExplosionGuard, Workload, count_interleavings, random_workload,
                                  run_exhaustive, run_stress, trace_signature)
from traverse_lab.structures import STRUCTURES
from traverse_lab.trace import dumps, validate_trace

TWO_CONTAINS = Workload("lazylist", [["contains:2"], ["contains:3"]], setup=["insert:2"])


def test_one_thread_one_op_has_one_trace():
    runs = list(run_exhaustive(Workload("lazylist", [["insert:1"]]), preemption_bound=None))
    assert len(runs) == 1 and runs[0].status == "ok"


def test_unbounded_count_matches_schedule_counter():
    # each contains is begin + succ read + rem read; immutable key reads do not yield
    n = sum(1 for _ in run_exhaustive(TWO_CONTAINS, preemption_bound=None))
    assert n == count_schedules((3, 3)) == 20


@pytest.mark.parametrize("lengths", [(1,), (2, 3), (3, 3, 1), (4, 2, 2)])
def test_multinomial_matches_recursive_counter(lengths):
    assert count_interleavings(list(lengths)) == count_schedules(lengths)


def test_preemption_bound_is_monotone():
    counts = [sum(1 for _ in run_exhaustive(TWO_CONTAINS, p)) for p in (0, 1, 2, None)]
    assert counts == sorted(counts) and counts[0] == 2


def test_explosion_guard():
    with pytest.raises(ExplosionGuard):
        list(run_exhaustive(TWO_CONTAINS, None, max_traces=5))


def test_exhaustive_is_deterministic():
    wl = Workload("citrus", [["delete:2"], ["contains:3"]], setup=["insert:2", "insert:1", "insert:3"])
    a = [dumps(r.trace) for r in run_exhaustive(wl, 1)]
    b = [dumps(r.trace) for r in run_exhaustive(wl, 1)]
    assert a == b and len(set(a)) > 1


def test_every_explored_trace_validates():
    for name in STRUCTURES:
        wl = explore.sweep_workloads(name)[0]
        for r in run_exhaustive(wl, 1):
            assert validate_trace(r.trace).ok


def test_signature_ignores_cross_thread_read_order():
    sigs = {trace_signature(r.trace) for r in run_exhaustive(TWO_CONTAINS, None)}
    assert len(sigs) < 20


def test_workload_json_round_trip(tmp_path):
    wl = explore.sweep_workloads("cftree")[-1]
    path = tmp_path / "wl.json"
    path.write_text(json.dumps(wl.to_json()))
    again = explore.load_workload(str(path))
    assert again == wl


def test_workload_rejects_unknown_structure():
    with pytest.raises(ValueError):
        Workload("skiplist", [["insert:1"]])


def test_random_workload_is_seeded():
    a = random_workload("lotree", 2, 10, seed=3)
    b = random_workload("lotree", 2, 10, seed=3)
    assert a == b and a != random_workload("lotree", 2, 10, seed=4)


def test_replay_stress_is_bit_identical():
    wl = random_workload("citrus", 3, 40, seed=9)
    assert dumps(run_stress(wl, 9).trace) == dumps(run_stress(wl, 9).trace)


def test_unknown_stress_mode():
    with pytest.raises(ValueError):
        run_stress(random_workload("lazylist", 1, 1), mode="warp")


def test_registered_mutations():
    assert set(explore.MUTATIONS) == {"orig-insert-order", "skip-mark", "no-grace-period"}
    for name, (structure, _desc) in explore.MUTATIONS.items():
        assert name in STRUCTURES[structure].mutations_known
        (wl,) = explore.mutation_workloads(name)
        assert wl.mutations == (name,)


def test_register_new_mutation():
    explore.register_mutation("test-noop", "lazylist", "does nothing")
    try:
        assert "test-noop" in STRUCTURES["lazylist"].mutations_known
    finally:
        del explore.MUTATIONS["test-noop"]
        STRUCTURES["lazylist"].mutations_known -= {"test-noop"}


@pytest.mark.parametrize("name", sorted(explore.SCENARIOS))
def test_scenarios_complete(name):
    r = explore.scenario(name)
    assert r.status == "ok", r.detail
    assert validate_trace(r.trace).ok


def test_unknown_scenario():
    with pytest.raises(KeyError):
        explore.scenario("nope")


@pytest.mark.parametrize("name", sorted(STRUCTURES))
def test_sweep_shape(name):
    for wl in explore.sweep_workloads(name):
        assert 2 <= len(wl.threads) <= 3
        assert all(len(ops) <= 2 for ops in wl.threads)
        assert wl.keys == (1, 4)
