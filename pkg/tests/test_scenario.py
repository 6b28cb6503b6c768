import json
from pathlib import Path

import pytest
import requests

from aqnet.field import PollutionField
from aqnet.model import GeoPoint, NodeDescriptor, NodeKind
from aqnet.scenario import (
    AmbientProfile,
    NoiseModel,
    ScenarioConfig,
    ScenarioError,
    load_scenario,
    parse_timestamp,
    scenario_from_dict,
)
from aqnet.simulator import ControlServer, Simulator

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = {
    "start": 0,
    "end": 600,
    "field": {"baseline_pm25": 10.0, "baseline_pm10": 20.0},
    "nodes": [{"node_id": "a", "location": {"lat": 17.44, "lon": 78.35}}],
}


def test_minimal_scenario_defaults():
    sc = scenario_from_dict(MINIMAL)
    assert sc.sample_interval == 15
    assert sc.speedup == 1.0
    assert sc.nodes[0].kind == NodeKind.DEVELOPED
    assert sc.noise["a"] == NoiseModel()
    assert sc.ambient == AmbientProfile()


def test_missing_nodes_key_named():
    raw = dict(MINIMAL)
    del raw["nodes"]
    with pytest.raises(ScenarioError, match="`nodes`"):
        scenario_from_dict(raw)


@pytest.mark.parametrize("key", ["start", "end", "field"])
def test_missing_required_keys_named(key):
    raw = dict(MINIMAL)
    del raw[key]
    with pytest.raises(ScenarioError, match=key):
        scenario_from_dict(raw)


def test_bad_event_location_named():
    raw = json.loads(json.dumps(MINIMAL))
    raw["field"]["events"] = [{"center": {"lat": 95, "lon": 0}, "onset": 0}]
    with pytest.raises(ScenarioError, match=r"events\[0\]"):
        scenario_from_dict(raw)


def test_iso_and_epoch_timestamps():
    assert parse_timestamp("2019-10-27T14:00:00Z") == 1572184800
    assert parse_timestamp(1572184800) == 1572184800
    assert parse_timestamp("1572184800") == 1572184800
    with pytest.raises(ScenarioError, match="mystery"):
        parse_timestamp("not a time", "mystery")


def test_start_must_precede_end():
    raw = dict(MINIMAL, start=600, end=600)
    with pytest.raises(ScenarioError):
        scenario_from_dict(raw)


def test_duplicate_node_ids_rejected():
    raw = json.loads(json.dumps(MINIMAL))
    raw["nodes"].append(dict(raw["nodes"][0]))
    with pytest.raises(ScenarioError):
        scenario_from_dict(raw)


def test_not_json(tmp_path):
    path = tmp_path / "broken.scenario"
    path.write_text("{nope")
    with pytest.raises(ScenarioError, match="JSON"):
        load_scenario(path)


class TestBundledScenarios:
    def test_diwali_loads(self):
        sc = load_scenario(SCENARIOS / "diwali.scenario")
        assert len(sc.nodes) == 9
        assert sum(1 for n in sc.nodes if not n.online) == 1  # node9 starts offline
        assert sc.node("node9").online is False
        assert sc.node("node1").kind == NodeKind.REFERENCE
        assert len(sc.field.events) == 3
        assert (sc.end - sc.start) / sc.speedup <= 60.0
        burst_amplitudes = [e.amplitude_pm10 for e in sc.field.events[:2]]
        for amp in burst_amplitudes:
            ratio = (sc.field.baseline_pm10 + amp) / sc.field.baseline_pm10
            assert 10.0 <= ratio <= 25.0

    def test_demo_loads(self):
        sc = load_scenario(SCENARIOS / "demo.scenario")
        assert all(n.online for n in sc.nodes)
        assert sc.field.events == ()


class FailNeverUploader:
    def __init__(self):
        self.count = 0

    def upload(self, node_id, sample):
        self.count += 1
        return self.count


class TestControlServer:
    @pytest.fixture
    def sim(self):
        sc = ScenarioConfig(
            nodes=(NodeDescriptor("a", "A", GeoPoint(17.44, 78.35)),),
            noise={"a": NoiseModel()},
            field=PollutionField(baseline_pm25=10, baseline_pm10=20),
            start=0,
            end=300,
            speedup=1_000_000.0,
            rng_seed=1,
        )
        return Simulator(sc, uploader=FailNeverUploader())

    @pytest.fixture
    def control(self, sim):
        server = ControlServer(sim, port=0)
        server.start()
        yield f"http://127.0.0.1:{server.port}", sim
        server.stop()

    def test_status(self, control):
        url, sim = control
        status = requests.get(f"{url}/sim/status", timeout=5).json()
        assert status["online"] == {"a": True}
        assert status["sim_time"] == 0

    def test_inject_event(self, control):
        url, sim = control
        resp = requests.post(
            f"{url}/sim/events",
            json={"lat": 17.44, "lon": 78.35, "amplitude_pm25": 100.0, "onset": 0},
            timeout=5,
        )
        assert resp.status_code == 200
        assert resp.json()["event_id"] == 1
        sim.run()  # applies queued controls
        status = requests.get(f"{url}/sim/status", timeout=5).json()
        assert len(status["events"]) == 1

    def test_inject_event_validation(self, control):
        url, _ = control
        resp = requests.post(f"{url}/sim/events", json={"lat": 17.44}, timeout=5)
        assert resp.status_code == 400
        assert "lon" in resp.json()["error"]
        resp = requests.post(
            f"{url}/sim/events",
            json={"lat": 17.44, "lon": 78.35, "amplitude_pm25": -1},
            timeout=5,
        )
        assert resp.status_code == 400

    def test_toggle_node(self, control):
        url, sim = control
        resp = requests.post(f"{url}/sim/nodes/a/online", json={"online": False}, timeout=5)
        assert resp.status_code == 200
        report = sim.run()
        assert report.per_node["a"].sent == 0

    def test_toggle_unknown_node(self, control):
        url, _ = control
        resp = requests.post(f"{url}/sim/nodes/zz/online", json={"online": False}, timeout=5)
        assert resp.status_code == 404
