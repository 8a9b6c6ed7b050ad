import json

import pytest

import absflow


def test_failure_free_run_matches_oracle():
    report = absflow.run("chain3", "gen:500:8", protocol="abs", interval="50")
    expected = absflow.oracle("chain3", "gen:500:8")
    assert report["records_ingested"] == 500
    assert report["sink_outputs"] == expected["sink_outputs"]
    assert report["sink_digest"] == expected["sink_digest"]
    assert [e["epoch"] for e in report["epochs"]] == list(range(1, len(report["epochs"]) + 1))


def test_kill_and_recover_is_exactly_once():
    expected = absflow.oracle("loop", "gen:200:4:3")
    report = absflow.run("loop", "gen:200:4:3", interval="20", kills=["head@150"])
    assert report["failures"] == 1
    assert report["recoveries"] == 1
    assert report["sink_outputs"] == expected["sink_outputs"]


def test_runs_are_deterministic():
    a = absflow.run("diamond", "gen:300", interval="25", seed=7, kills=["a@40"])
    b = absflow.run("diamond", "gen:300", interval="25", seed=7, kills=["a@40"])
    assert a["digest"] == b["digest"]


def test_store_round_trip(tmp_path):
    report = absflow.run("loop", "gen:60:3:2", interval="10", store=str(tmp_path), fsync=False)
    snap = absflow.load_snapshot(str(tmp_path))
    assert snap["epoch"] == report["epochs"][-1]["epoch"]
    assert set(snap["task_states"]) == {"src", "head", "tail", "sink"}
    assert list(snap["back_edge_logs"]) == ["tail->head"]
    assert absflow.load_snapshot(str(tmp_path / "empty")) is None


def test_multi_worker_run_matches_oracle():
    report = absflow.run("layered:2", "gen:3000:16", interval="500", workers=2)
    assert report["sink_digest"] == absflow.oracle("layered:2", "gen:3000:16")["sink_digest"]


def test_topology_json_and_errors():
    doc = json.loads(absflow.topology_json("chain3"))
    assert [t["id"] for t in doc["tasks"]] == ["src", "map", "sink"]
    with pytest.raises(ValueError):
        absflow.run("no-such-topology")
    with pytest.raises(absflow.TaskFailure):
        absflow.run("chain3", "gen:100", interval="10", kills=["map@5"], recover=False)
    with pytest.raises(ValueError):
        absflow.run("chain3", kills=["map"])


def test_quick_verify_subset():
    results = absflow.verify(["durability"], quick=True)
    assert [r["name"] for r in results] == ["durability"]
    assert results[0]["pass"], results[0]["detail"]
