"""HTTP surface of the channel store.

Updates arrive as GET requests with query parameters (the protocol the
sensor firmware speaks); reads are JSON/CSV. A read-only interpolation
endpoint rasterizes the current station values so map clients can overlay
the field without re-implementing the math.
"""

from __future__ import annotations

import logging
import threading
from urllib.parse import parse_qs, urlsplit

from .errors import InsufficientDataError, DuplicateNodeError, UnknownChannelError
from .interpolation import BoundingBox, idw_grid
from .model import AveragingWindow, FIVE_MINUTES, GeoPoint, NodeDescriptor, NodeKind, Parameter
from .store import ChannelStore, export_csv, format_timestamp, parse_timestamp
from .webutil import ApiHandler, ApiServer

logger = logging.getLogger(__name__)

T_MIN = -(2**62)
T_MAX = 2**62


def _channel_info(channel, include_key: bool = False) -> dict:
    d = channel.descriptor
    info = {
        "channel_id": channel.channel_id,
        "node_id": d.node_id,
        "display_name": d.display_name,
        "lat": d.location.lat,
        "lon": d.location.lon,
        "kind": d.kind.value,
        "entries": channel.count(),
        "field1": "pm25",
        "field2": "pm10",
        "field3": "temperature",
        "field4": "humidity",
    }
    if include_key:
        info["write_key"] = channel.write_key
    return info


class _IngestHandler(ApiHandler):
    @property
    def store(self) -> ChannelStore:
        return self.server.store  # type: ignore[attr-defined]

    def _query(self) -> dict[str, str]:
        raw = parse_qs(urlsplit(self.path).query, keep_blank_values=True)
        return {k: v[-1] for k, v in raw.items()}

    def _is_admin(self, query: dict[str, str]) -> bool:
        supplied = self.headers.get("X-Admin-Key") or query.get("admin_key")
        return supplied is not None and supplied == self.server.admin_key  # type: ignore[attr-defined]

    def do_GET(self) -> None:
        path = urlsplit(self.path).path
        try:
            if path == "/update":
                self._get_update()
            elif path == "/channels":
                self._get_channels()
            elif path == "/analysis/idw.json":
                self._get_idw()
            else:
                parts = [p for p in path.split("/") if p]
                if len(parts) >= 2 and parts[0] == "channels":
                    self._get_channel_subresource(parts)
                else:
                    self.send_json_error(404, "unknown path")
        except Exception:
            logger.exception("error handling GET %s", self.path)
            self.send_json_error(500, "internal error")

    def do_POST(self) -> None:
        path = urlsplit(self.path).path
        if path == "/channels":
            self._post_channels()
        else:
            self.send_json_error(404, "unknown path")

    # -- endpoints --

    def _get_update(self) -> None:
        entry_id, reason = self.store.handle_update(self._query())
        if reason == "unauthorized":
            self.send_text(401, "0")
        elif reason == "bad_request":
            self.send_text(400, "0")
        else:
            self.send_text(200, str(entry_id))

    def _post_channels(self) -> None:
        query = self._query()
        if not self._is_admin(query):
            self.send_json_error(401, "admin key required")
            return
        body = self.read_json_body()
        if not isinstance(body, dict):
            self.send_json_error(400, "expected a JSON body")
            return
        try:
            descriptor = NodeDescriptor(
                node_id=str(body["node_id"]),
                display_name=str(body.get("display_name", body["node_id"])),
                location=GeoPoint(float(body["lat"]), float(body["lon"])),
                kind=NodeKind(body.get("kind", "developed")),
                online=bool(body.get("online", True)),
            )
        except KeyError as exc:
            self.send_json_error(400, f"missing field {exc.args[0]!r}")
            return
        except (TypeError, ValueError) as exc:
            self.send_json_error(400, str(exc))
            return
        try:
            channel_id, write_key = self.store.register_channel(descriptor)
        except DuplicateNodeError as exc:
            self.send_json_error(409, str(exc))
            return
        self.send_json(201, {"channel_id": channel_id, "write_key": write_key})

    def _get_channels(self) -> None:
        include_key = self._is_admin(self._query())
        channels = [_channel_info(ch, include_key) for ch in self.store.channels()]
        self.send_json(200, {"channels": channels})

    def _get_channel_subresource(self, parts: list[str]) -> None:
        try:
            channel = self.store.channel(int(parts[1]))
        except (ValueError, UnknownChannelError):
            self.send_json_error(404, f"unknown channel {parts[1]!r}")
            return
        rest = "/".join(parts[2:])
        if rest == "feeds/last.json":
            entry = channel.latest()
            self.send_json(200, entry.as_json() if entry else {})
        elif rest == "feeds.json":
            self._get_feeds(channel)
        elif rest == "export.csv":
            self._get_export(channel)
        else:
            self.send_json_error(404, "unknown path")

    def _parse_range(self, query: dict[str, str]) -> tuple[int, int] | None:
        t0, t1 = T_MIN, T_MAX
        if "start" in query:
            parsed = parse_timestamp(query["start"])
            if parsed is None:
                self.send_json_error(400, f"malformed start {query['start']!r}")
                return None
            t0 = parsed
        if "end" in query:
            parsed = parse_timestamp(query["end"])
            if parsed is None:
                self.send_json_error(400, f"malformed end {query['end']!r}")
                return None
            t1 = parsed
        if t0 > t1:
            self.send_json_error(400, f"start {query.get('start')!r} is after end {query.get('end')!r}")
            return None
        return t0, t1

    def _get_feeds(self, channel) -> None:
        query = self._query()
        bounds = self._parse_range(query)
        if bounds is None:
            return
        max_results = None
        if "results" in query:
            try:
                max_results = int(query["results"])
            except ValueError:
                self.send_json_error(400, f"malformed results {query['results']!r}")
                return
        entries = channel.range(bounds[0], bounds[1], max_results)
        self.send_json(
            200,
            {
                "channel": _channel_info(channel),
                "feeds": [e.as_json() for e in entries],
            },
        )

    def _get_export(self, channel) -> None:
        bounds = self._parse_range(self._query())
        if bounds is None:
            return
        text = export_csv(channel, bounds[0], bounds[1])
        self.send_body(200, text.encode("utf-8"), "text/csv; charset=utf-8")

    def _get_idw(self) -> None:
        query = self._query()
        try:
            parameter = Parameter(query.get("parameter", "pm25"))
        except ValueError:
            self.send_json_error(400, f"unknown parameter {query.get('parameter')!r}")
            return
        window = FIVE_MINUTES
        if "window" in query:
            try:
                window = AveragingWindow.parse(query["window"])
            except ValueError:
                self.send_json_error(400, f"malformed window {query['window']!r}")
                return
        channels = self.store.channels()
        if not channels:
            self.send_json_error(404, "no channels registered")
            return
        at_raw = query.get("at", "latest")
        if at_raw == "latest":
            latest = [ch.latest() for ch in channels]
            stamps = [e.sample.timestamp for e in latest if e is not None]
            if not stamps:
                self.send_json_error(404, "no data in any channel")
                return
            at = max(stamps)
        else:
            parsed = parse_timestamp(at_raw)
            if parsed is None:
                self.send_json_error(400, f"malformed at {at_raw!r}")
                return
            at = parsed
        try:
            rows = int(query.get("rows", "24"))
            cols = int(query.get("cols", "24"))
            power = float(query.get("power", "2"))
        except ValueError as exc:
            self.send_json_error(400, str(exc))
            return
        bucket = window.bucket_start(at)
        stations = []
        excluded = []
        for ch in channels:
            entries = ch.range(bucket, bucket + window.seconds)
            values = [
                e.sample.value(parameter) for e in entries if e.sample.value(parameter) is not None
            ]
            if values:
                stations.append((ch.descriptor, sum(values) / len(values)))
            else:
                excluded.append(ch.descriptor.node_id)
        if not stations:
            self.send_json_error(404, f"no station data at {format_timestamp(bucket)}")
            return
        bbox = None
        if "bbox" in query:
            try:
                lat0, lon0, lat1, lon1 = (float(v) for v in query["bbox"].split(","))
                bbox = BoundingBox(lat0, lon0, lat1, lon1)
            except ValueError as exc:
                self.send_json_error(400, f"malformed bbox: {exc}")
                return
        if bbox is None:
            bbox = BoundingBox.around([ch.descriptor.location for ch in channels])
        try:
            grid = idw_grid(
                stations, bbox, rows, cols, timestamp=bucket, parameter=parameter.value, power=power
            )
        except (InsufficientDataError, ValueError) as exc:
            self.send_json_error(400, str(exc))
            return
        payload = {"meta": grid.metadata(), "cells": grid.to_feature_collection()}
        payload["meta"]["excluded"] = excluded
        payload["meta"]["window_seconds"] = window.seconds
        self.send_json(200, payload)


class IngestServer:
    """Threaded ingest server bound to a store; start()/stop() lifecycle."""

    def __init__(
        self,
        store: ChannelStore,
        host: str = "127.0.0.1",
        port: int = 0,
        admin_key: str = "admin",
    ):
        self.store = store
        self._httpd = ApiServer((host, port), _IngestHandler)
        self._httpd.store = store  # type: ignore[attr-defined]
        self._httpd.admin_key = admin_key  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        host = self._httpd.server_address[0]
        return f"http://{host}:{self.port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.begin_shutdown()
        if self._thread is not None:
            self._thread.join(timeout=10)
        self.store.close()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()
