"""HTTP client for the ingest server's read and registration APIs."""

from __future__ import annotations

import requests

from .model import GeoPoint, NodeDescriptor, NodeKind, Parameter, SensorSample, TimeSeries
from .store import parse_timestamp


class ClientError(Exception):
    pass


class IngestClient:
    def __init__(self, server_url: str, timeout: float = 10.0):
        self.server_url = server_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def _get_json(self, path: str, params: dict | None = None):
        try:
            resp = self._session.get(f"{self.server_url}{path}", params=params, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ClientError(f"cannot reach server at {self.server_url}: {exc}") from exc
        if resp.status_code >= 400:
            detail = ""
            try:
                detail = resp.json().get("error", "")
            except ValueError:
                pass
            raise ClientError(f"GET {path}: {resp.status_code} {detail}".strip())
        return resp.json()

    def register(self, descriptor: NodeDescriptor, admin_key: str) -> tuple[int, str]:
        body = {
            "node_id": descriptor.node_id,
            "display_name": descriptor.display_name,
            "lat": descriptor.location.lat,
            "lon": descriptor.location.lon,
            "kind": descriptor.kind.value,
            "online": descriptor.online,
        }
        try:
            resp = self._session.post(
                f"{self.server_url}/channels",
                json=body,
                headers={"X-Admin-Key": admin_key},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ClientError(f"cannot reach server at {self.server_url}: {exc}") from exc
        if resp.status_code == 409:
            raise DuplicateRegistration(descriptor.node_id)
        if resp.status_code != 201:
            raise ClientError(f"registration failed ({resp.status_code}): {resp.text}")
        payload = resp.json()
        return int(payload["channel_id"]), str(payload["write_key"])

    def channels(self, admin_key: str | None = None) -> list[dict]:
        params = {"admin_key": admin_key} if admin_key else None
        return self._get_json("/channels", params)["channels"]

    def last(self, channel_id: int) -> dict | None:
        payload = self._get_json(f"/channels/{channel_id}/feeds/last.json")
        return payload or None

    def feeds(
        self,
        channel_id: int,
        start: int | str | None = None,
        end: int | str | None = None,
        results: int | None = None,
    ) -> list[dict]:
        params: dict = {}
        if start is not None:
            params["start"] = start
        if end is not None:
            params["end"] = end
        if results is not None:
            params["results"] = results
        return self._get_json(f"/channels/{channel_id}/feeds.json", params or None)["feeds"]

    def samples(self, channel_id: int, start=None, end=None) -> list[SensorSample]:
        out = []
        for feed in self.feeds(channel_id, start=start, end=end):
            ts = parse_timestamp(feed["created_at"])
            values = {
                p.value: feed.get(f)
                for f, p in (
                    ("field1", Parameter.PM25),
                    ("field2", Parameter.PM10),
                    ("field3", Parameter.TEMPERATURE),
                    ("field4", Parameter.HUMIDITY),
                )
            }
            out.append(SensorSample(timestamp=ts, **values))
        return out

    def idw_grid_json(self, **params) -> dict:
        return self._get_json("/analysis/idw.json", params or None)

    def close(self) -> None:
        self._session.close()


class DuplicateRegistration(ClientError):
    def __init__(self, node_id: str):
        super().__init__(f"node {node_id!r} already registered")
        self.node_id = node_id


def descriptor_from_info(info: dict) -> NodeDescriptor:
    """Rebuild a node descriptor from a /channels listing element."""
    return NodeDescriptor(
        node_id=info["node_id"],
        display_name=info.get("display_name", info["node_id"]),
        location=GeoPoint(info["lat"], info["lon"]),
        channel_id=int(info["channel_id"]),
        kind=NodeKind(info.get("kind", "developed")),
    )


def series_from_samples(
    node_id: str, samples: list[SensorSample], parameter: Parameter
) -> TimeSeries:
    """Raw per-parameter series from feed samples (last value wins on
    duplicate timestamps)."""
    points: dict[int, float] = {}
    for s in samples:
        v = s.value(parameter)
        if v is not None:
            points[s.timestamp] = v
    return TimeSeries(node_id=node_id, parameter=parameter, points=tuple(sorted(points.items())))
