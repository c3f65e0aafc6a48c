import json

import pytest

from traverse_lab.cli import RunConfig, UsageError, main, parse_keys
from traverse_lab.explore import Workload


def test_parse_keys():
    assert parse_keys("1..4") == (1, 4)


@pytest.mark.parametrize("bad", ["4..1", "1-4", "a..b"])
def test_parse_keys_rejects(bad):
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        parse_keys(bad)


def test_run_config_checks_names():
    with pytest.raises(UsageError):
        RunConfig("explore", structure="skiplist")
    with pytest.raises(UsageError):
        RunConfig("explore", structure="lazylist", mutations=("skip-mark",))


def test_explore_lazylist_exit_zero(capsys):
    assert main(["explore", "--structure", "lazylist", "--threads", "2", "--ops", "2",
                 "--keys", "1..4"]) == 0
    assert "lazylist" in capsys.readouterr().out


def test_explore_mutant_exit_two(tmp_path, capsys):
    code = main(["explore", "--structure", "lotree", "--mutate", "orig-insert-order",
                 "--threads", "2", "--ops", "1", "--out", str(tmp_path), "--format", "json"])
    assert code == 2
    payload = json.loads((tmp_path / "explore-verdicts.json").read_text())
    s = payload["structures"][0]
    assert s["conditions"]["effect-points"] > 0
    assert "no witness" in s["examples"]["effect-points"]["chain"]


def test_explore_workload_file(tmp_path, capsys):
    wl = Workload("cftree", [["insert:2"], ["contains:2"]])
    path = tmp_path / "wl.json"
    path.write_text(json.dumps(wl.to_json()))
    assert main(["explore", "--workload", str(path)]) == 0


def test_explore_filters_out_everything():
    assert main(["explore", "--structure", "lazylist", "--threads", "1"]) == 1


def test_scenario_exit_zero(capsys):
    assert main(["scenario", "citrus-weakreach"]) == 0
    out = capsys.readouterr().out
    assert "bst_k: forepassed violated" in out and "weak_k: forepassed holds" in out


def test_stress_then_check(tmp_path, capsys):
    assert main(["stress", "--structure", "lotree", "--threads", "2", "--ops", "20",
                 "--seed", "5", "--out", str(tmp_path)]) == 0
    trace = tmp_path / "stress-trace.jsonl"
    assert trace.exists()
    capsys.readouterr()
    assert main(["check", str(trace), "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["ok"] and payload["structure"] == "lotree"
    assert payload["verdicts"]["traversal-correct"]["ok"]


def test_check_corrupted_trace_is_a_fault(tmp_path, capsys):
    assert main(["stress", "--structure", "lazylist", "--threads", "2", "--ops", "10",
                 "--out", str(tmp_path)]) == 0
    path = tmp_path / "stress-trace.jsonl"
    lines = path.read_text().splitlines()
    for i, line in enumerate(lines):
        rec = json.loads(line)
        if rec["ev"] == "r" and rec["loc"][1] == "succ":
            rec["val"] = {"ref": 999}
            lines[i] = json.dumps(rec)
            break
    path.write_text("\n".join(lines) + "\n")
    assert main(["check", str(path)]) == 1


def test_check_unreadable_file():
    assert main(["check", "/nonexistent/trace.jsonl"]) == 1


def test_usage_error_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["explore", "--keys", "9..1"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_mutation_for_other_structure_is_usage_error():
    assert main(["explore", "--structure", "cftree", "--mutate", "skip-mark"]) == 1
