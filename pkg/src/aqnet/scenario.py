"""Scenario configuration: the simulated world and how to load it from disk.

A scenario file is JSON whose keys mirror the dataclass fields below.
Timestamps (``start``, ``end``, event ``onset``) may be given either as UTC
epoch seconds or as ISO-8601 strings like ``2019-10-27T14:00:00Z``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .field import BurstEvent, PollutionField
from .model import GeoPoint, NodeDescriptor, NodeKind


class ScenarioError(ValueError):
    """A scenario file that cannot be used, with the offending key named."""


@dataclass(frozen=True)
class NoiseModel:
    """Per-sensor error envelope.

    The PM error is the larger of the relative and absolute bounds, the
    reading is then snapped to the sensor's resolution grid. Defaults follow
    a common low-cost optical PM sensor datasheet (max of +/-15% and
    +/-10 ug/m3, 0.3 ug/m3 resolution) and a DHT22-class T/RH sensor.
    """

    relative_error: float = 0.15
    absolute_error: float = 10.0
    resolution: float = 0.3
    temp_error: float = 0.5
    humidity_error: float = 2.0

    def __post_init__(self) -> None:
        for name in ("relative_error", "absolute_error", "resolution", "temp_error", "humidity_error"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"noise model field {name} must be >= 0, got {v!r}")

    def pm_envelope(self, true_value: float) -> float:
        return max(self.relative_error * true_value, self.absolute_error)


@dataclass(frozen=True)
class AmbientProfile:
    """Sinusoidal daily temperature/humidity cycle shared by all nodes."""

    temp_min: float = 10.0
    temp_max: float = 30.0
    rh_min: float = 30.0
    rh_max: float = 80.0
    phase: int = 10_800  # temperature peaks a quarter-day after this offset

    def temperature(self, t: float) -> float:
        mid = (self.temp_max + self.temp_min) / 2.0
        amp = (self.temp_max - self.temp_min) / 2.0
        return mid + amp * math.sin(2.0 * math.pi * ((t % 86_400) - self.phase) / 86_400)

    def humidity(self, t: float) -> float:
        # humid when cool: anti-phase with temperature
        mid = (self.rh_max + self.rh_min) / 2.0
        amp = (self.rh_max - self.rh_min) / 2.0
        return mid - amp * math.sin(2.0 * math.pi * ((t % 86_400) - self.phase) / 86_400)


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete simulated deployment."""

    nodes: tuple[NodeDescriptor, ...]
    noise: dict[str, NoiseModel]
    field: PollutionField
    start: int
    end: int
    sample_interval: int = 15
    speedup: float = 1.0
    rng_seed: int = 0
    server_url: str = "http://127.0.0.1:8100"
    ambient: AmbientProfile = AmbientProfile()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.nodes:
            raise ValueError("scenario needs at least one node")
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node_id values must be unique")
        if self.start >= self.end:
            raise ValueError(f"start ({self.start}) must be before end ({self.end})")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be > 0")
        if self.speedup < 1:
            raise ValueError("speedup must be >= 1")

    def node(self, node_id: str) -> NodeDescriptor:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)


def parse_timestamp(value, key: str = "timestamp") -> int:
    """Accept epoch seconds (int/float) or ISO-8601; return UTC epoch seconds."""
    if isinstance(value, bool):
        raise ScenarioError(f"{key}: expected a timestamp, got {value!r}")
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(text)
        except ValueError:
            pass
        try:
            dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
        except ValueError as exc:
            raise ScenarioError(f"{key}: not epoch seconds or ISO-8601: {value!r}") from exc
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise ScenarioError(f"{key}: expected a timestamp, got {value!r}")


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ScenarioError(f"missing required key `{key}` in {context}")
    return mapping[key]


def _geopoint(raw, context: str) -> GeoPoint:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{context}: expected an object with lat/lon")
    try:
        return GeoPoint(float(_require(raw, "lat", context)), float(_require(raw, "lon", context)))
    except ValueError as exc:
        raise ScenarioError(f"{context}: {exc}") from exc


def _event(raw: dict, index: int) -> BurstEvent:
    ctx = f"field.events[{index}]"
    try:
        return BurstEvent(
            center=_geopoint(_require(raw, "center", ctx), f"{ctx}.center"),
            amplitude_pm25=float(raw.get("amplitude_pm25", 0.0)),
            amplitude_pm10=float(raw.get("amplitude_pm10", 0.0)),
            sigma=float(raw.get("sigma", 80.0)),
            onset=parse_timestamp(_require(raw, "onset", ctx), f"{ctx}.onset"),
            ramp=int(raw.get("ramp", 0)),
            half_life=int(raw.get("half_life", 21_600)),
            event_id=index + 1,
        )
    except ValueError as exc:
        raise ScenarioError(f"{ctx}: {exc}") from exc


def _field(raw) -> PollutionField:
    if not isinstance(raw, dict):
        raise ScenarioError("`field` must be an object")
    try:
        return PollutionField(
            baseline_pm25=float(_require(raw, "baseline_pm25", "field")),
            baseline_pm10=float(_require(raw, "baseline_pm10", "field")),
            diurnal_amplitude_pm25=float(raw.get("diurnal_amplitude_pm25", 0.0)),
            diurnal_amplitude_pm10=float(raw.get("diurnal_amplitude_pm10", 0.0)),
            diurnal_phase=int(raw.get("diurnal_phase", 0)),
            events=tuple(_event(e, i) for i, e in enumerate(raw.get("events", []))),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field: {exc}") from exc


def _node(raw: dict, index: int) -> tuple[NodeDescriptor, NoiseModel]:
    ctx = f"nodes[{index}]"
    node_id = str(_require(raw, "node_id", ctx))
    try:
        descriptor = NodeDescriptor(
            node_id=node_id,
            display_name=str(raw.get("display_name", node_id)),
            location=_geopoint(_require(raw, "location", ctx), f"{ctx}.location"),
            kind=NodeKind(raw.get("kind", "developed")),
            online=bool(raw.get("online", True)),
        )
        noise = NoiseModel(**raw.get("noise", {}))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{ctx}: {exc}") from exc
    return descriptor, noise


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    nodes_raw = _require(raw, "nodes", "scenario")
    if not isinstance(nodes_raw, list) or not nodes_raw:
        raise ScenarioError("`nodes` must be a non-empty list")
    parsed = [_node(n, i) for i, n in enumerate(nodes_raw)]
    ambient_raw = raw.get("ambient", {})
    try:
        ambient = AmbientProfile(**ambient_raw) if isinstance(ambient_raw, dict) else None
    except TypeError as exc:
        raise ScenarioError(f"ambient: {exc}") from exc
    if ambient is None:
        raise ScenarioError("`ambient` must be an object")
    try:
        return ScenarioConfig(
            nodes=tuple(d for d, _ in parsed),
            noise={d.node_id: nm for d, nm in parsed},
            field=_field(_require(raw, "field", "scenario")),
            start=parse_timestamp(_require(raw, "start", "scenario"), "start"),
            end=parse_timestamp(_require(raw, "end", "scenario"), "end"),
            sample_interval=int(raw.get("sample_interval", 15)),
            speedup=float(raw.get("speedup", 1.0)),
            rng_seed=int(raw.get("rng_seed", 0)),
            server_url=str(raw.get("server_url", "http://127.0.0.1:8100")),
            ambient=ambient,
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from exc
    return scenario_from_dict(raw)
