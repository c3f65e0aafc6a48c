import pytest

from traverse_lab import battery, explore
from traverse_lab.explore import Workload


@pytest.mark.parametrize("name", sorted(explore.SCENARIOS))
def test_scenario_expectations_hold(name):
    report = battery.scenario_report(name, explore.scenario(name))
    failed = [(e.claim, e.detail) for e in report if not e.ok]
    assert not failed


def test_citrus_scenario_pairs_verdicts():
    report = {e.claim: e.ok for e in battery.scenario_report(
        "citrus-weakreach", explore.scenario("citrus-weakreach"))}
    assert report["bst_k: forepassed violated"] and report["weak_k: forepassed holds"]
    assert report["bst_k: traversal correctness violated"] and report["weak_k: traversal correct"]


def test_full_battery_on_small_lazylist_sweep():
    wl = Workload("lazylist", [["insert:2"], ["delete:2"]], setup=["insert:2"])
    s = battery.check_workloads([wl], preemption_bound=2)
    assert s.ok, s.examples
    assert {"validate", "effect-points", "lin-search", "traversal-correct", "inferred-sound",
            "compat", "forepassed", "strong-forepassed"} <= s.conditions
    assert "field-witness" not in s.conditions  # the lazy list has no field pair
    assert s.stats["lin_search"] == s.unique


def test_skip_mark_breaks_forepassed():
    s = battery.check_workloads(explore.mutation_workloads("skip-mark"))
    assert s.failures.get("forepassed", 0) > 0


def test_skip_mark_premise_gate():
    s = battery.check_workloads(explore.mutation_workloads("skip-mark"))
    assert s.failures.get("inferred-sound", 0) == 0


def test_no_grace_period_breaks_weak_forepassed():
    s = battery.check_workloads(explore.mutation_workloads("no-grace-period"))
    assert s.failures.get("weak-forepassed", 0) + s.failures.get("traversal-correct", 0) > 0


def test_cut_off_runs_only_validate():
    wl = Workload("lotree", [["insert:2"], ["insert:2"]], restart_bound=1)
    s = battery.check_workloads([wl], preemption_bound=2)
    assert sum(s.statuses.values()) == s.traces


def test_stress_trace_effect_points():
    run = explore.run_stress(explore.random_workload("cftree", 4, 50, seed=2), seed=2)
    cfg = battery.BatteryConfig(lin_search_max_ops=0, traversals=False, forepassed=False,
                                fields=False, lemmas=False)
    res = battery.check_trace(run.trace, "cftree", (), cfg)
    assert res.ok and "effect-points" in res.verdicts


def test_summary_json():
    s = battery.Summary("lazylist")
    r = battery.BatteryResult()
    r.add("x")
    from traverse_lab.checker import Verdict
    r.add("y", Verdict("y").fail(chain="bad"))
    s.absorb(r, "here")
    out = s.to_json()
    assert out["conditions"] == {"x": 0, "y": 1} and out["examples"]["y"]["where"] == "here"
    assert not s.ok
