"""Shared domain types: geolocated nodes, sensor samples, time series and
windowed averaging.

Everything here is immutable after construction and every function is pure,
so values can be shared freely across threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

EARTH_RADIUS_M = 6_371_000.0


class Parameter(str, enum.Enum):
    """The four telemetry streams a node reports."""

    PM25 = "pm25"
    PM10 = "pm10"
    TEMPERATURE = "temperature"
    HUMIDITY = "humidity"


class NodeKind(str, enum.Enum):
    DEVELOPED = "developed"
    REFERENCE = "reference"


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range [-90, 90]: {self.lat!r}")
        if not (math.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range [-180, 180]: {self.lon!r}")


@dataclass(frozen=True)
class SensorSample:
    """One timestamped reading from one node.

    Fields other than the timestamp are optional: a node may report any
    subset, and gaps are represented as ``None`` rather than sentinel values.
    Concentrations must be finite and non-negative; ``pm25 <= pm10`` is not
    enforced because the two channels are measured independently.
    """

    timestamp: int  # UTC epoch seconds
    pm25: float | None = None
    pm10: float | None = None
    temperature: float | None = None
    humidity: float | None = None

    def __post_init__(self) -> None:
        if all(v is None for v in (self.pm25, self.pm10, self.temperature, self.humidity)):
            raise ValueError("sample must carry at least one field")
        for name in ("pm25", "pm10"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if self.temperature is not None and not math.isfinite(self.temperature):
            raise ValueError(f"temperature must be finite, got {self.temperature!r}")
        if self.humidity is not None and not (
            math.isfinite(self.humidity) and 0.0 <= self.humidity <= 100.0
        ):
            raise ValueError(f"humidity must lie in [0, 100], got {self.humidity!r}")

    def value(self, parameter: Parameter) -> float | None:
        return getattr(self, parameter.value)


@dataclass(frozen=True)
class NodeDescriptor:
    """Identity and placement of one sensor node.

    ``channel_id`` is None until the node is bound to a feed channel on the
    ingest server.
    """

    node_id: str
    display_name: str
    location: GeoPoint
    channel_id: int | None = None
    kind: NodeKind = NodeKind.DEVELOPED
    online: bool = True

    def __post_init__(self) -> None:
        if not self.node_id:
            raise ValueError("node_id must be non-empty")


@dataclass(frozen=True)
class AveragingWindow:
    """A fixed-width averaging window, anchored to the Unix epoch."""

    seconds: int

    def __post_init__(self) -> None:
        if self.seconds <= 0:
            raise ValueError(f"window width must be positive, got {self.seconds}")

    def bucket_start(self, timestamp: int) -> int:
        return (timestamp // self.seconds) * self.seconds

    @classmethod
    def parse(cls, text: str) -> "AveragingWindow":
        """Parse '5m', '1h', '1d' or a plain number of seconds."""
        units = {"s": 1, "m": 60, "h": 3600, "d": 86400}
        text = text.strip().lower()
        if text and text[-1] in units:
            return cls(int(text[:-1]) * units[text[-1]])
        return cls(int(text))


FIVE_MINUTES = AveragingWindow(300)
ONE_HOUR = AveragingWindow(3600)
ONE_DAY = AveragingWindow(86400)


@dataclass(frozen=True)
class TimeSeries:
    """Ordered (timestamp, value) points for one parameter of one node."""

    node_id: str
    parameter: Parameter
    points: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        prev = None
        for ts, v in self.points:
            if prev is not None and ts <= prev:
                raise ValueError(f"timestamps must be strictly increasing (at {ts})")
            if not math.isfinite(v):
                raise ValueError(f"non-finite value at t={ts}: {v!r}")
            prev = ts

    def __len__(self) -> int:
        return len(self.points)

    def timestamps(self) -> list[int]:
        return [ts for ts, _ in self.points]

    def values(self) -> list[float]:
        return [v for _, v in self.points]


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters, using the mean Earth radius."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def window_average(series: TimeSeries, window: AveragingWindow) -> TimeSeries:
    """Average a series into epoch-aligned buckets.

    Each output point is (bucket start, arithmetic mean of the bucket's
    values); buckets with no input points are omitted. Applying the same
    window twice is a no-op.
    """
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for ts, v in series.points:
        b = window.bucket_start(ts)
        sums[b] = sums.get(b, 0.0) + v
        counts[b] = counts.get(b, 0) + 1
    points = tuple((b, sums[b] / counts[b]) for b in sorted(sums))
    return TimeSeries(node_id=series.node_id, parameter=series.parameter, points=points)


def align_pair(
    x: TimeSeries, y: TimeSeries, window: AveragingWindow
) -> list[tuple[float, float]]:
    """Window-average both series and inner-join them on bucket start.

    Only buckets present in both series contribute a pair; output is ordered
    by bucket. Series must carry the same parameter.
    """
    if x.parameter != y.parameter:
        raise ValueError(f"parameter mismatch: {x.parameter.value} vs {y.parameter.value}")
    ax = dict(window_average(x, window).points)
    ay = dict(window_average(y, window).points)
    return [(ax[b], ay[b]) for b in sorted(ax.keys() & ay.keys())]
