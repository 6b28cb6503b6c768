import requests

from aqnet.server import IngestServer
from aqnet.store import ChannelStore


def register(server, node_id="n1", lat=17.4455, lon=78.3490, **extra):
    body = {"node_id": node_id, "display_name": node_id.upper(), "lat": lat, "lon": lon}
    body.update(extra)
    resp = requests.post(
        f"{server.url}/channels", json=body, headers={"X-Admin-Key": "test-admin"}, timeout=5
    )
    assert resp.status_code == 201, resp.text
    payload = resp.json()
    return payload["channel_id"], payload["write_key"]


def update(server, key, created_at=None, **fields):
    params = {"api_key": key, **{k: str(v) for k, v in fields.items()}}
    if created_at is not None:
        params["created_at"] = created_at
    return requests.get(f"{server.url}/update", params=params, timeout=5)


class TestUpdateEndpoint:
    def test_happy_path(self, server):
        _, key = register(server)
        resp = update(server, key, field1=23.4, field2=51.0)
        assert resp.status_code == 200
        assert resp.text == "1"
        assert update(server, key, field1=9).text == "2"

    def test_bad_key_unauthorized(self, server):
        register(server)
        resp = update(server, "WRONGKEY12345678", field1=1.0)
        assert resp.status_code == 401
        assert resp.text == "0"

    def test_no_fields_bad_request(self, server):
        _, key = register(server)
        resp = requests.get(f"{server.url}/update", params={"api_key": key}, timeout=5)
        assert resp.status_code == 400
        assert resp.text == "0"

    def test_partial_parse(self, server):
        channel_id, key = register(server)
        assert update(server, key, field1="abc", field2=51.0).text == "1"
        last = requests.get(f"{server.url}/channels/{channel_id}/feeds/last.json", timeout=5).json()
        assert last["field1"] is None
        assert last["field2"] == 51.0


class TestRegistration:
    def test_requires_admin_key(self, server):
        resp = requests.post(
            f"{server.url}/channels",
            json={"node_id": "x", "lat": 0, "lon": 0},
            timeout=5,
        )
        assert resp.status_code == 401

    def test_duplicate_conflict(self, server):
        register(server, "n1")
        resp = requests.post(
            f"{server.url}/channels",
            json={"node_id": "n1", "lat": 0, "lon": 0},
            headers={"X-Admin-Key": "test-admin"},
            timeout=5,
        )
        assert resp.status_code == 409

    def test_bad_location_rejected(self, server):
        resp = requests.post(
            f"{server.url}/channels",
            json={"node_id": "x", "lat": 99, "lon": 0},
            headers={"X-Admin-Key": "test-admin"},
            timeout=5,
        )
        assert resp.status_code == 400

    def test_listing_hides_keys_without_admin(self, server):
        register(server, "n1")
        public = requests.get(f"{server.url}/channels", timeout=5).json()["channels"]
        assert "write_key" not in public[0]
        admin = requests.get(
            f"{server.url}/channels", params={"admin_key": "test-admin"}, timeout=5
        ).json()["channels"]
        assert len(admin[0]["write_key"]) == 16


class TestReads:
    def test_last_empty_channel(self, server):
        channel_id, _ = register(server)
        resp = requests.get(f"{server.url}/channels/{channel_id}/feeds/last.json", timeout=5)
        assert resp.status_code == 200
        assert resp.json() == {}

    def test_unknown_channel_404(self, server):
        resp = requests.get(f"{server.url}/channels/42/feeds/last.json", timeout=5)
        assert resp.status_code == 404

    def test_feeds_window_and_results(self, server):
        channel_id, key = register(server)
        for i in range(10):
            update(server, key, created_at=str(1000 + i * 10), field1=float(i))
        url = f"{server.url}/channels/{channel_id}/feeds.json"
        payload = requests.get(url, timeout=5).json()
        assert payload["channel"]["node_id"] == "n1"
        assert payload["channel"]["field1"] == "pm25"
        assert [f["entry_id"] for f in payload["feeds"]] == list(range(1, 11))

        windowed = requests.get(url, params={"start": "1020", "end": "1050"}, timeout=5).json()
        assert [f["field1"] for f in windowed["feeds"]] == [2.0, 3.0, 4.0]

        truncated = requests.get(url, params={"results": "3"}, timeout=5).json()
        assert [f["entry_id"] for f in truncated["feeds"]] == [8, 9, 10]

    def test_feeds_inverted_range_rejected(self, server):
        channel_id, _ = register(server)
        resp = requests.get(
            f"{server.url}/channels/{channel_id}/feeds.json",
            params={"start": "100", "end": "50"},
            timeout=5,
        )
        assert resp.status_code == 400

    def test_export_csv(self, server):
        channel_id, key = register(server)
        update(server, key, created_at="2019-10-27T17:00:00Z", field1=23.4)
        resp = requests.get(f"{server.url}/channels/{channel_id}/export.csv", timeout=5)
        assert resp.status_code == 200
        assert resp.headers["Content-Type"].startswith("text/csv")
        assert resp.text == (
            "created_at,entry_id,field1,field2,field3,field4\n"
            "2019-10-27T17:00:00Z,1,23.4,,,\n"
        )

    def test_cors_header_present(self, server):
        resp = requests.get(f"{server.url}/channels", timeout=5)
        assert resp.headers["Access-Control-Allow-Origin"] == "*"
        preflight = requests.options(f"{server.url}/channels", timeout=5)
        assert preflight.status_code == 204


class TestIdwEndpoint:
    def fill(self, server):
        # two stations 400 m apart, constant values over a 5-minute bucket
        id_a, key_a = register(server, "a", lat=17.4455, lon=78.3490)
        id_b, key_b = register(server, "b", lat=17.4491, lon=78.3490)
        for i in range(6):
            update(server, key_a, created_at=str(600 + i * 15), field1=10.0, field2=20.0)
            update(server, key_b, created_at=str(600 + i * 15), field1=30.0, field2=60.0)
        return id_a, id_b

    def test_grid_payload(self, server):
        self.fill(server)
        resp = requests.get(
            f"{server.url}/analysis/idw.json",
            params={"parameter": "pm25", "at": "610", "rows": 8, "cols": 8},
            timeout=5,
        )
        assert resp.status_code == 200
        payload = resp.json()
        assert payload["meta"]["rows"] == 8
        assert payload["meta"]["timestamp"] == 600
        assert len(payload["cells"]["features"]) == 64
        values = [f["properties"]["value"] for f in payload["cells"]["features"]]
        assert all(10.0 <= v <= 30.0 for v in values)
        stations = {s["node_id"]: s["value"] for s in payload["meta"]["stations"]}
        assert stations == {"a": 10.0, "b": 30.0}

    def test_latest_and_excluded(self, server):
        id_a, id_b = self.fill(server)
        # node b stops reporting; a later bucket has data only from a
        _, key_a = 0, None
        admin = requests.get(
            f"{server.url}/channels", params={"admin_key": "test-admin"}, timeout=5
        ).json()["channels"]
        key_a = next(c["write_key"] for c in admin if c["node_id"] == "a")
        update(server, key_a, created_at="1200", field1=11.0)
        resp = requests.get(
            f"{server.url}/analysis/idw.json", params={"parameter": "pm25", "at": "latest"}, timeout=5
        )
        payload = resp.json()
        assert payload["meta"]["timestamp"] == 1200
        assert payload["meta"]["excluded"] == ["b"]
        values = [f["properties"]["value"] for f in payload["cells"]["features"]]
        assert all(v == 11.0 for v in values)  # single station: flat raster

    def test_no_data_at_timestamp(self, server):
        self.fill(server)
        resp = requests.get(
            f"{server.url}/analysis/idw.json", params={"parameter": "pm25", "at": "999999"}, timeout=5
        )
        assert resp.status_code == 404
        assert "no station data" in resp.json()["error"]

    def test_empty_server_404(self, server):
        resp = requests.get(f"{server.url}/analysis/idw.json", timeout=5)
        assert resp.status_code == 404


class TestRestartDurability:
    def test_acknowledged_entries_survive(self, tmp_path):
        data_dir = tmp_path / "data"
        server = IngestServer(ChannelStore(data_dir), port=0, admin_key="test-admin")
        server.start()
        try:
            channel_id, key = register(server)
            for i in range(25):
                assert update(server, key, created_at=str(i), field1=float(i)).text == str(i + 1)
            port = server.port
        finally:
            server.stop()

        reopened = IngestServer(ChannelStore(data_dir), port=port, admin_key="test-admin")
        reopened.start()
        try:
            feeds = requests.get(
                f"{reopened.url}/channels/{channel_id}/feeds.json", timeout=5
            ).json()["feeds"]
            assert [f["entry_id"] for f in feeds] == list(range(1, 26))
            # appends continue gap-free on the same log
            assert update(reopened, key, created_at="100", field1=1.0).text == "26"
        finally:
            reopened.stop()
