"""Telemetry simulator: samples the pollution field with per-sensor noise and
uploads over the channel-update wire protocol at the configured cadence.

The run loop owns a single simulated clock that advances at ``speedup`` times
real time. Live mutations (event injection, node outages) are funneled
through a queue and applied at tick boundaries, so they are safe to invoke
from the control HTTP surface while a run is active.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np
import requests

from .field import BurstEvent, field_value
from .model import NodeDescriptor, Parameter, SensorSample
from .scenario import AmbientProfile, NoiseModel, ScenarioConfig
from .webutil import ApiHandler, ApiServer

logger = logging.getLogger(__name__)


def quantize(value: float, resolution: float) -> float:
    """Snap a reading to the sensor's resolution grid (nearest multiple)."""
    if resolution <= 0:
        return value
    return round(round(value / resolution) * resolution, 9)


def node_rng(rng_seed: int, node_id: str) -> np.random.Generator:
    """Independent, reproducible stream per node: outages or reordering of
    one node never shift the draws of another."""
    seq = np.random.SeedSequence([rng_seed & 0xFFFFFFFF, *node_id.encode("utf-8")])
    return np.random.Generator(np.random.PCG64(seq))


def sample_node(
    node: NodeDescriptor,
    noise: NoiseModel,
    field_,
    ambient: AmbientProfile,
    t: int,
    rng: np.random.Generator,
) -> SensorSample | None:
    """Measure the field at the node's location at simulated time ``t``.

    PM readings are the true field value plus a uniform error within the
    envelope max(relative*value, absolute), clamped at zero and snapped to
    the resolution grid. Temperature/humidity come from the ambient profile
    plus uniform errors, reported at 0.1 resolution. Offline nodes measure
    nothing. Exactly four uniform draws are consumed per call, keeping the
    per-node stream stable.
    """
    if not node.online:
        return None
    draws = rng.uniform(-1.0, 1.0, 4)
    readings: dict[str, float] = {}
    for parameter, draw in ((Parameter.PM25, draws[0]), (Parameter.PM10, draws[1])):
        true_value = field_value(field_, node.location, t, parameter)
        measured = true_value + draw * noise.pm_envelope(true_value)
        readings[parameter.value] = quantize(max(0.0, measured), noise.resolution)
    temperature = round(ambient.temperature(t) + draws[2] * noise.temp_error, 1)
    humidity = round(ambient.humidity(t) + draws[3] * noise.humidity_error, 1)
    humidity = min(100.0, max(0.0, humidity))
    return SensorSample(
        timestamp=int(t),
        pm25=readings["pm25"],
        pm10=readings["pm10"],
        temperature=temperature,
        humidity=humidity,
    )


class UploadError(Exception):
    """A sample that could not be stored."""


def _iso_utc(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class HttpUploader:
    """Sends samples as GET /update requests, one retry on transport errors.

    A "0" response is a rejection by the server and is not retried (it is
    deterministic); transport failures get a single immediate retry.
    """

    def __init__(self, server_url: str, write_keys: dict[str, str], timeout: float = 10.0):
        self.server_url = server_url.rstrip("/")
        self.write_keys = dict(write_keys)
        self.timeout = timeout
        self._session = requests.Session()

    def upload(self, node_id: str, sample: SensorSample) -> int:
        try:
            key = self.write_keys[node_id]
        except KeyError:
            raise UploadError(f"no write key for node {node_id}") from None
        params = {
            "api_key": key,
            "field1": str(sample.pm25),
            "field2": str(sample.pm10),
            "field3": str(sample.temperature),
            "field4": str(sample.humidity),
            "created_at": _iso_utc(sample.timestamp),
        }
        url = f"{self.server_url}/update"
        last_exc: Exception | None = None
        for attempt in range(2):
            try:
                resp = self._session.get(url, params=params, timeout=self.timeout)
                body = resp.text.strip()
                if resp.status_code == 200 and body.isdigit() and int(body) > 0:
                    return int(body)
                raise UploadError(f"server rejected update ({resp.status_code}: {body!r})")
            except UploadError:
                raise
            except requests.RequestException as exc:
                last_exc = exc
                # new connection on retry: the old one may be half-closed
                self._session.close()
                self._session = requests.Session()
        raise UploadError(f"transport failure after retry: {last_exc}")

    def close(self) -> None:
        self._session.close()


@dataclass
class NodeCounters:
    sent: int = 0
    failed: int = 0


@dataclass
class RunReport:
    per_node: dict[str, NodeCounters] = field(default_factory=dict)
    ticks: int = 0
    wall_seconds: float = 0.0
    errors: list[str] = field(default_factory=list)

    @property
    def total_sent(self) -> int:
        return sum(c.sent for c in self.per_node.values())

    @property
    def total_failed(self) -> int:
        return sum(c.failed for c in self.per_node.values())


_MAX_REPORTED_ERRORS = 20


class Simulator:
    """Drives one scenario against an uploader.

    ``uploader`` needs an ``upload(node_id, sample) -> entry_id`` method; the
    default is :class:`HttpUploader` against the scenario's server_url (write
    keys must then be supplied).
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        uploader=None,
        write_keys: dict[str, str] | None = None,
    ):
        if uploader is None:
            uploader = HttpUploader(scenario.server_url, write_keys or {})
        self.scenario = scenario
        self.uploader = uploader
        self._field = scenario.field
        self._online = {n.node_id: n.online for n in scenario.nodes}
        self._rngs = {n.node_id: node_rng(scenario.rng_seed, n.node_id) for n in scenario.nodes}
        self._counters = {n.node_id: NodeCounters() for n in scenario.nodes}
        self._controls: queue.Queue = queue.Queue()
        self._next_event_id = len(scenario.field.events) + 1
        self._sim_time = scenario.start
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self._errors: list[str] = []

    # -- control surface (safe from any thread; applied at tick boundaries) --

    def inject_event(
        self,
        center,
        amplitude_pm25: float = 0.0,
        amplitude_pm10: float = 0.0,
        sigma: float = 80.0,
        onset: int | None = None,
        ramp: int = 0,
        half_life: int = 21_600,
    ) -> int:
        """Validate and enqueue a burst event; returns its id immediately."""
        with self._lock:
            if onset is None:
                onset = self._sim_time
            event = BurstEvent(
                center=center,
                amplitude_pm25=float(amplitude_pm25),
                amplitude_pm10=float(amplitude_pm10),
                sigma=float(sigma),
                onset=int(onset),
                ramp=int(ramp),
                half_life=int(half_life),
                event_id=self._next_event_id,
            )
            self._next_event_id += 1
        self._controls.put(("event", event))
        return event.event_id

    def set_node_online(self, node_id: str, online: bool) -> None:
        if node_id not in self._online:
            raise KeyError(node_id)
        self._controls.put(("online", node_id, bool(online)))

    def request_stop(self) -> None:
        self._stop.set()

    def status(self) -> dict:
        with self._lock:
            t = self._sim_time
            events = [
                {
                    "event_id": ev.event_id,
                    "lat": ev.center.lat,
                    "lon": ev.center.lon,
                    "amplitude_pm25": ev.amplitude_pm25,
                    "amplitude_pm10": ev.amplitude_pm10,
                    "sigma": ev.sigma,
                    "onset": ev.onset,
                    "active": ev.time_gain(t) > 0.0,
                }
                for ev in self._field.events
            ]
            return {
                "sim_time": t,
                "sim_time_iso": _iso_utc(t),
                "start": self.scenario.start,
                "end": self.scenario.end,
                "speedup": self.scenario.speedup,
                "online": dict(self._online),
                "nodes": {
                    node_id: {"sent": c.sent, "failed": c.failed}
                    for node_id, c in self._counters.items()
                },
                "events": events,
            }

    # -- run loop --

    def _apply_controls(self) -> None:
        while True:
            try:
                item = self._controls.get_nowait()
            except queue.Empty:
                return
            with self._lock:
                if item[0] == "event":
                    self._field = self._field.with_event(item[1])
                else:
                    self._online[item[1]] = item[2]

    def run(self) -> RunReport:
        sc = self.scenario
        wall_start = time.monotonic()
        tick = 0
        t = sc.start
        while t < sc.end and not self._stop.is_set():
            self._apply_controls()
            with self._lock:
                self._sim_time = t
            for node in sc.nodes:
                if not self._online[node.node_id]:
                    continue
                live = replace(node, online=True)
                sample = sample_node(
                    live, sc.noise[node.node_id], self._field, sc.ambient, t, self._rngs[node.node_id]
                )
                counters = self._counters[node.node_id]
                try:
                    self.uploader.upload(node.node_id, sample)
                    with self._lock:
                        counters.sent += 1
                except UploadError as exc:
                    with self._lock:
                        counters.failed += 1
                        if len(self._errors) < _MAX_REPORTED_ERRORS:
                            self._errors.append(f"{node.node_id}@{t}: {exc}")
                    logger.warning("upload failed for %s at t=%d: %s", node.node_id, t, exc)
            tick += 1
            t = sc.start + tick * sc.sample_interval
            target = wall_start + (t - sc.start) / sc.speedup
            delay = target - time.monotonic()
            if delay > 0:
                self._stop.wait(delay)
        with self._lock:
            self._sim_time = min(t, sc.end)
        return RunReport(
            per_node={k: NodeCounters(c.sent, c.failed) for k, c in self._counters.items()},
            ticks=tick,
            wall_seconds=time.monotonic() - wall_start,
            errors=list(self._errors),
        )


class _ControlHandler(ApiHandler):
    @property
    def sim(self) -> Simulator:
        return self.server.simulator  # type: ignore[attr-defined]

    def do_GET(self) -> None:
        if self.path.split("?", 1)[0] == "/sim/status":
            self.send_json(200, self.sim.status())
        else:
            self.send_json_error(404, "unknown path")

    def do_POST(self) -> None:
        path = self.path.split("?", 1)[0]
        if path == "/sim/events":
            self._post_event()
            return
        parts = [p for p in path.split("/") if p]
        if len(parts) == 4 and parts[0] == "sim" and parts[1] == "nodes" and parts[3] == "online":
            self._post_online(parts[2])
            return
        self.send_json_error(404, "unknown path")

    def _post_event(self) -> None:
        from .model import GeoPoint  # local import avoids cycle at module load

        body = self.read_json_body()
        if body is None:
            self.send_json_error(400, "expected a JSON body")
            return
        try:
            center = GeoPoint(float(body["lat"]), float(body["lon"]))
            event_id = self.sim.inject_event(
                center=center,
                amplitude_pm25=float(body.get("amplitude_pm25", 0.0)),
                amplitude_pm10=float(body.get("amplitude_pm10", 0.0)),
                sigma=float(body.get("sigma", 80.0)),
                onset=body.get("onset"),
                ramp=int(body.get("ramp", 0)),
                half_life=int(body.get("half_life", 21_600)),
            )
        except KeyError as exc:
            self.send_json_error(400, f"missing field {exc.args[0]!r}")
            return
        except (TypeError, ValueError) as exc:
            self.send_json_error(400, str(exc))
            return
        self.send_json(200, {"event_id": event_id})

    def _post_online(self, node_id: str) -> None:
        body = self.read_json_body()
        if body is None or "online" not in body:
            self.send_json_error(400, "expected a JSON body with `online`")
            return
        try:
            self.sim.set_node_online(node_id, bool(body["online"]))
        except KeyError:
            self.send_json_error(404, f"unknown node {node_id!r}")
            return
        self.send_json(200, {"node_id": node_id, "online": bool(body["online"])})


class ControlServer:
    """HTTP control surface for a running simulator."""

    def __init__(self, simulator: Simulator, host: str = "127.0.0.1", port: int = 0):
        self._httpd = ApiServer((host, port), _ControlHandler)
        self._httpd.simulator = simulator  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._httpd.begin_shutdown()
        self._thread.join(timeout=10)
