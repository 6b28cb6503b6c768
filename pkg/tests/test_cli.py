import json
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
import requests

from aqnet.cli import main

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def make_scenario_file(tmp_path, server_url, n_nodes=2, seconds=600, events=()):
    nodes = []
    for i in range(n_nodes):
        nodes.append(
            {
                "node_id": f"n{i + 1}",
                "display_name": f"N{i + 1}",
                "location": {"lat": 17.4455 + i * 0.001, "lon": 78.3490},
            }
        )
    scenario = {
        "rng_seed": 5,
        "start": 0,
        "end": seconds,
        "sample_interval": 15,
        "speedup": 1_000_000,
        "server_url": server_url,
        "field": {"baseline_pm25": 30.0, "baseline_pm10": 55.0, "events": list(events)},
        "nodes": nodes,
    }
    path = tmp_path / "mini.scenario"
    path.write_text(json.dumps(scenario))
    return path


def feed_channel(server, node_id, values, lat=17.4455, lon=78.3490, step=300):
    resp = requests.post(
        f"{server.url}/channels",
        json={"node_id": node_id, "lat": lat, "lon": lon},
        headers={"X-Admin-Key": "test-admin"},
        timeout=5,
    )
    assert resp.status_code == 201
    payload = resp.json()
    for i, v in enumerate(values):
        r = requests.get(
            f"{server.url}/update",
            params={"api_key": payload["write_key"], "field1": str(v), "field2": str(v * 2),
                    "created_at": str(i * step)},
            timeout=5,
        )
        assert r.text != "0"
    return payload["channel_id"]


class TestServeCommand:
    def test_bad_data_dir_nonzero_exit(self, tmp_path, capsys):
        data_file = tmp_path / "not-a-dir"
        data_file.write_text("occupied")
        code = main(["serve", "--data-dir", str(data_file), "--port", "0"])
        assert code == 2
        assert "data dir" in capsys.readouterr().err

    def test_port_in_use(self, tmp_path, capsys):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        try:
            code = main(["serve", "--data-dir", str(tmp_path / "d"), "--port", str(port)])
        finally:
            blocker.close()
        assert code == 2
        assert "bind" in capsys.readouterr().err

    def test_serve_subprocess_lifecycle(self, tmp_path):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        blocker.close()
        proc = subprocess.Popen(
            [sys.executable, "-m", "aqnet.cli", "serve", "--port", str(port),
             "--data-dir", str(tmp_path / "data"), "--admin-key", "k"],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        try:
            deadline = time.monotonic() + 10
            url = f"http://127.0.0.1:{port}"
            last_error = None
            while time.monotonic() < deadline:
                try:
                    resp = requests.get(f"{url}/channels", timeout=1)
                    assert resp.json() == {"channels": []}
                    break
                except requests.RequestException as exc:
                    last_error = exc
                    time.sleep(0.1)
            else:
                pytest.fail(f"server never came up: {last_error}")
            resp = requests.post(
                f"{url}/channels",
                json={"node_id": "x", "lat": 1.0, "lon": 2.0},
                headers={"X-Admin-Key": "k"},
                timeout=5,
            )
            assert resp.status_code == 201
        finally:
            proc.send_signal(signal.SIGINT)
            proc.wait(timeout=10)
        assert proc.returncode == 0
        # registration persisted through the clean shutdown
        assert (tmp_path / "data" / "registry.json").exists()


class TestSimulateCommand:
    def test_mini_run_counts(self, tmp_path, server, capsys):
        scenario = make_scenario_file(tmp_path, server.url)
        code = main(["simulate", "--scenario", str(scenario), "--admin-key", "test-admin"])
        out = capsys.readouterr().out
        assert code == 0
        # 600 s at 15 s cadence = 40 per node
        assert "n1" in out and "n2" in out
        assert out.count("      40       0") == 2
        feeds = requests.get(f"{server.url}/channels/1/feeds.json", timeout=5).json()["feeds"]
        assert len(feeds) == 40

    def test_rerun_reuses_channels(self, tmp_path, server, capsys):
        scenario = make_scenario_file(tmp_path, server.url)
        assert main(["simulate", "--scenario", str(scenario), "--admin-key", "test-admin"]) == 0
        assert main(["simulate", "--scenario", str(scenario), "--admin-key", "test-admin"]) == 0
        channels = requests.get(f"{server.url}/channels", timeout=5).json()["channels"]
        assert len(channels) == 2  # not re-registered
        assert channels[0]["entries"] == 80

    def test_missing_nodes_key_named(self, tmp_path, server, capsys):
        path = tmp_path / "broken.scenario"
        path.write_text(json.dumps({"start": 0, "end": 10, "field": {"baseline_pm25": 1, "baseline_pm10": 1}}))
        code = main(["simulate", "--scenario", str(path)])
        assert code == 2
        assert "nodes" in capsys.readouterr().err

    def test_unreachable_server(self, tmp_path, capsys):
        scenario = make_scenario_file(tmp_path, "http://127.0.0.1:1")
        code = main(["simulate", "--scenario", str(scenario)])
        assert code == 2
        assert "reach" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["simulate", "--scenario", "/nope/missing.scenario"]) == 2


class TestAnalyzeKendall:
    def test_identical_channels_tau_one(self, server, tmp_path, capsys):
        values = [((i * 13) % 37) + 1.0 for i in range(40)]
        feed_channel(server, "a", values)
        feed_channel(server, "b", values, lat=17.4460)
        code = main([
            "analyze", "kendall", "--server", server.url, "--channels", "all",
            "--parameter", "pm25", "--window", "5m", "--min-pairs", "20",
            "--out", str(tmp_path / "out"),
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "min 1.0000 max 1.0000" in out
        tau_csv = (tmp_path / "out" / "tau.csv").read_text()
        assert tau_csv.splitlines()[0] == "node_id,a,b"
        assert (tmp_path / "out" / "pair_counts.csv").exists()

    def test_insufficient_channels_exit_3(self, server, tmp_path, capsys):
        feed_channel(server, "a", [1.0, 2.0, 3.0])
        code = main([
            "analyze", "kendall", "--server", server.url, "--out", str(tmp_path / "out"),
        ])
        assert code == 3
        assert "at least 2" in capsys.readouterr().err


class TestAnalyzeQQ:
    def test_same_distribution(self, server, tmp_path, capsys):
        values = [30.0 + (i % 11) for i in range(60)]
        id_a = feed_channel(server, "a", values, step=3600)
        id_b = feed_channel(server, "b", values, lat=17.4460, step=3600)
        code = main([
            "analyze", "qq", "--server", server.url, "--channels", f"{id_a},{id_b}",
            "--window", "1h", "--quantiles", "20", "--out", str(tmp_path / "out"),
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "max |quantile offset| 0.000" in out
        qq_lines = (tmp_path / "out" / "qq.csv").read_text().splitlines()
        assert qq_lines[0] == "p,quantile_x,quantile_y"
        assert len(qq_lines) == 21

    def test_needs_exactly_two(self, server, tmp_path, capsys):
        feed_channel(server, "a", [1.0, 2.0])
        code = main(["analyze", "qq", "--server", server.url, "--channels", "all",
                     "--out", str(tmp_path / "out")])
        assert code == 1

    def test_empty_channel_exit_3(self, server, tmp_path, capsys):
        id_a = feed_channel(server, "a", [30.0 + i for i in range(10)], step=3600)
        resp = requests.post(
            f"{server.url}/channels",
            json={"node_id": "empty", "lat": 17.4, "lon": 78.3},
            headers={"X-Admin-Key": "test-admin"},
            timeout=5,
        )
        id_b = resp.json()["channel_id"]
        code = main(["analyze", "qq", "--server", server.url, "--channels", f"{id_a},{id_b}",
                     "--out", str(tmp_path / "out")])
        assert code == 3
        assert "empty" in capsys.readouterr().err


class TestAnalyzeIdw:
    def test_grid_artifacts_and_excluded(self, server, tmp_path, capsys):
        feed_channel(server, "a", [10.0] * 6, lat=17.4450, step=15)
        feed_channel(server, "b", [50.0] * 6, lat=17.4490, step=15)
        resp = requests.post(
            f"{server.url}/channels",
            json={"node_id": "silent", "lat": 17.4470, "lon": 78.3500},
            headers={"X-Admin-Key": "test-admin"},
            timeout=5,
        )
        assert resp.status_code == 201
        code = main([
            "analyze", "idw", "--server", server.url, "--parameter", "pm25",
            "--at", "30", "--rows", "6", "--cols", "6", "--out", str(tmp_path / "out"),
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "excluded (no data at timestamp): silent" in out
        grid_csv = (tmp_path / "out" / "grid.csv").read_text().strip().splitlines()
        assert len(grid_csv) == 6
        geojson = json.loads((tmp_path / "out" / "grid.geojson").read_text())
        assert len(geojson["features"]) == 36
        meta = json.loads((tmp_path / "out" / "grid.meta.json").read_text())
        assert meta["excluded"] == ["silent"]
        assert {s["node_id"] for s in meta["stations"]} == {"a", "b"}

    def test_no_data_at_timestamp_exit_3(self, server, tmp_path, capsys):
        feed_channel(server, "a", [10.0] * 6, step=15)
        code = main([
            "analyze", "idw", "--server", server.url, "--at", "999999",
            "--out", str(tmp_path / "out"),
        ])
        assert code == 3
        assert "no station data" in capsys.readouterr().err

    def test_missing_at_is_usage_error(self, server, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "idw", "--server", server.url])
        assert exc.value.code == 1


def test_unknown_flag_usage_exit():
    with pytest.raises(SystemExit) as exc:
        main(["serve", "--bogus"])
    assert exc.value.code == 1
