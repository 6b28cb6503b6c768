"""Channel-feed storage: write-key-authenticated updates appended to
per-channel logs, with read access by latest value or time range.

Every channel maps the four update fields the same way: field1=pm25,
field2=pm10, field3=temperature, field4=humidity. Persistence is one
append-only CSV log per channel (identical to the export format) plus a
registry JSON; the in-memory index is rebuilt from these at startup, so a
restart keeps every update that was flushed; by default, every accepted
one.
"""

from __future__ import annotations

import json
import logging
import math
import os
import secrets
import string
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import DuplicateNodeError, UnknownChannelError
from .model import GeoPoint, NodeDescriptor, NodeKind, Parameter, SensorSample

logger = logging.getLogger(__name__)

FIELD_MAP: dict[str, Parameter] = {
    "field1": Parameter.PM25,
    "field2": Parameter.PM10,
    "field3": Parameter.TEMPERATURE,
    "field4": Parameter.HUMIDITY,
}
CSV_HEADER = "created_at,entry_id,field1,field2,field3,field4"

_KEY_ALPHABET = string.ascii_uppercase + string.ascii_lowercase + string.digits


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> int | None:
    """ISO-8601 (naive treated as UTC) or epoch seconds; None when malformed."""
    text = text.strip()
    if not text:
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


@dataclass(frozen=True)
class Entry:
    entry_id: int
    sample: SensorSample

    def csv_line(self) -> str:
        cells = [format_timestamp(self.sample.timestamp), str(self.entry_id)]
        for field in FIELD_MAP:
            value = self.sample.value(FIELD_MAP[field])
            cells.append("" if value is None else str(value))
        return ",".join(cells)

    def as_json(self) -> dict:
        obj: dict = {
            "created_at": format_timestamp(self.sample.timestamp),
            "entry_id": self.entry_id,
        }
        for field, parameter in FIELD_MAP.items():
            obj[field] = self.sample.value(parameter)
        return obj


def parse_entry_line(line: str) -> Entry:
    cells = line.rstrip("\n").split(",")
    if len(cells) != 6:
        raise ValueError(f"malformed log line: {line!r}")
    ts = parse_timestamp(cells[0])
    if ts is None:
        raise ValueError(f"malformed timestamp in log line: {cells[0]!r}")
    values = {
        parameter.value: (float(cells[i + 2]) if cells[i + 2] != "" else None)
        for i, parameter in enumerate(FIELD_MAP.values())
    }
    return Entry(entry_id=int(cells[1]), sample=SensorSample(timestamp=ts, **values))


class Channel:
    """One append-ordered feed. Appends are serialized by a lock; reads copy
    a consistent snapshot under the same lock (cheap at this scale)."""

    def __init__(self, channel_id: int, write_key: str, descriptor: NodeDescriptor, log_path: Path):
        self.channel_id = channel_id
        self.write_key = write_key
        self.descriptor = descriptor
        self.log_path = log_path
        self._entries: list[Entry] = []
        self._lock = threading.Lock()
        self._log_file = None
        self._closed = False
        self._last_created: int | None = None

    def load(self) -> None:
        if self.log_path.exists():
            with self.log_path.open("r", encoding="utf-8") as fh:
                header = fh.readline()
                if header.strip() and header.strip() != CSV_HEADER:
                    raise ValueError(f"{self.log_path}: unexpected log header {header!r}")
                lines = [ln for ln in fh if ln.strip()]
            for i, line in enumerate(lines):
                try:
                    self._entries.append(parse_entry_line(line))
                except ValueError:
                    if i == len(lines) - 1:
                        # torn final line from an interrupted write: drop it
                        logger.warning("%s: dropping torn trailing log line", self.log_path)
                        break
                    raise
        if self._entries:
            self._last_created = self._entries[-1].sample.timestamp

    def _open_log(self):
        if self._log_file is None:
            new = not self.log_path.exists() or self.log_path.stat().st_size == 0
            self._log_file = self.log_path.open("a", encoding="utf-8", newline="")
            if new:
                self._log_file.write(CSV_HEADER + "\n")
                self._log_file.flush()
        return self._log_file

    def append(self, sample: SensorSample, flush: bool = True) -> int:
        with self._lock:
            if self._closed:
                raise RuntimeError(f"channel {self.channel_id} store is closed")
            entry = Entry(entry_id=len(self._entries) + 1, sample=sample)
            log = self._open_log()
            log.write(entry.csv_line() + "\n")
            if flush:
                log.flush()
            self._entries.append(entry)
            self._last_created = sample.timestamp
            return entry.entry_id

    def next_server_timestamp(self, now: int) -> int:
        """Server-assigned created_at is kept non-decreasing per channel."""
        with self._lock:
            if self._last_created is not None and now < self._last_created:
                return self._last_created
            return now

    def latest(self) -> Entry | None:
        with self._lock:
            return self._entries[-1] if self._entries else None

    def count(self) -> int:
        with self._lock:
            return len(self._entries)

    def range(self, t0: int, t1: int, max_results: int | None = None) -> list[Entry]:
        if t0 > t1:
            raise ValueError(f"start {t0} is after end {t1}")
        with self._lock:
            snapshot = list(self._entries)
        matched = [e for e in snapshot if t0 <= e.sample.timestamp < t1]
        if max_results is not None and max_results >= 0 and len(matched) > max_results:
            matched = matched[len(matched) - max_results :]  # newest, ascending
        return matched

    def flush(self) -> None:
        with self._lock:
            if self._log_file is not None:
                self._log_file.flush()
                os.fsync(self._log_file.fileno())

    def close(self) -> None:
        with self._lock:
            self._closed = True
            if self._log_file is not None:
                self._log_file.flush()
                self._log_file.close()
                self._log_file = None


class ChannelStore:
    """Registry plus per-channel feeds, persisted under one data directory."""

    def __init__(self, data_dir: str | Path, flush_every: int = 1):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.flush_every = max(1, int(flush_every))
        self._channels: dict[int, Channel] = {}
        self._by_key: dict[str, Channel] = {}
        self._by_node: dict[str, Channel] = {}
        self._next_id = 1
        self._appends_since_flush = 0
        self._lock = threading.Lock()
        self._load()

    # -- persistence --

    @property
    def _registry_path(self) -> Path:
        return self.data_dir / "registry.json"

    def _log_path(self, channel_id: int) -> Path:
        return self.data_dir / f"channel_{channel_id}.csv"

    def _load(self) -> None:
        if not self._registry_path.exists():
            return
        raw = json.loads(self._registry_path.read_text(encoding="utf-8"))
        self._next_id = int(raw.get("next_channel_id", 1))
        for item in raw.get("channels", []):
            descriptor = NodeDescriptor(
                node_id=item["node_id"],
                display_name=item.get("display_name", item["node_id"]),
                location=GeoPoint(item["lat"], item["lon"]),
                channel_id=int(item["channel_id"]),
                kind=NodeKind(item.get("kind", "developed")),
                online=bool(item.get("online", True)),
            )
            channel = Channel(
                channel_id=int(item["channel_id"]),
                write_key=item["write_key"],
                descriptor=descriptor,
                log_path=self._log_path(int(item["channel_id"])),
            )
            channel.load()
            self._channels[channel.channel_id] = channel
            self._by_key[channel.write_key] = channel
            self._by_node[descriptor.node_id] = channel

    def _save_registry(self) -> None:
        payload = {
            "next_channel_id": self._next_id,
            "channels": [
                {
                    "channel_id": ch.channel_id,
                    "write_key": ch.write_key,
                    "node_id": ch.descriptor.node_id,
                    "display_name": ch.descriptor.display_name,
                    "lat": ch.descriptor.location.lat,
                    "lon": ch.descriptor.location.lon,
                    "kind": ch.descriptor.kind.value,
                    "online": ch.descriptor.online,
                }
                for ch in self._channels.values()
            ],
        }
        tmp = self._registry_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        tmp.replace(self._registry_path)

    # -- registration and lookup --

    def register_channel(self, descriptor: NodeDescriptor) -> tuple[int, str]:
        with self._lock:
            if descriptor.node_id in self._by_node:
                raise DuplicateNodeError(f"node {descriptor.node_id!r} already has a channel")
            channel_id = self._next_id
            self._next_id += 1
            while True:
                write_key = "".join(secrets.choice(_KEY_ALPHABET) for _ in range(16))
                if write_key not in self._by_key:
                    break
            bound = NodeDescriptor(
                node_id=descriptor.node_id,
                display_name=descriptor.display_name,
                location=descriptor.location,
                channel_id=channel_id,
                kind=descriptor.kind,
                online=descriptor.online,
            )
            channel = Channel(channel_id, write_key, bound, self._log_path(channel_id))
            self._channels[channel_id] = channel
            self._by_key[write_key] = channel
            self._by_node[descriptor.node_id] = channel
            self._save_registry()
            return channel_id, write_key

    def channel(self, channel_id: int) -> Channel:
        try:
            return self._channels[channel_id]
        except KeyError:
            raise UnknownChannelError(f"unknown channel {channel_id}") from None

    def channel_by_key(self, write_key: str) -> Channel | None:
        return self._by_key.get(write_key)

    def channels(self) -> list[Channel]:
        return sorted(self._channels.values(), key=lambda c: c.channel_id)

    # -- updates --

    def handle_update(
        self, query: dict[str, str], server_now: int | None = None
    ) -> tuple[int, str | None]:
        """Apply one wire-protocol update.

        Returns ``(entry_id, None)`` on success and ``(0, reason)`` on
        rejection, where reason is ``"unauthorized"`` (bad write key) or
        ``"bad_request"`` (no usable field values). Field values that do not
        parse as finite numbers in their parameter's valid range are treated
        as absent; the remaining fields are stored.
        """
        key = query.get("api_key", "")
        channel = self._by_key.get(key)
        if channel is None:
            return 0, "unauthorized"
        values: dict[str, float] = {}
        for field, parameter in FIELD_MAP.items():
            raw = query.get(field)
            if raw is None:
                continue
            try:
                value = float(raw)
            except ValueError:
                continue
            if not math.isfinite(value):
                continue
            if parameter in (Parameter.PM25, Parameter.PM10) and value < 0:
                continue
            if parameter == Parameter.HUMIDITY and not (0.0 <= value <= 100.0):
                continue
            values[parameter.value] = value
        if not values:
            return 0, "bad_request"
        created = None
        if "created_at" in query:
            created = parse_timestamp(query["created_at"])
        if created is None:
            now = server_now if server_now is not None else int(datetime.now(tz=timezone.utc).timestamp())
            created = channel.next_server_timestamp(now)
        sample = SensorSample(timestamp=created, **values)
        with self._lock:
            self._appends_since_flush += 1
            flush = self._appends_since_flush >= self.flush_every
            if flush:
                self._appends_since_flush = 0
        return channel.append(sample, flush=flush), None

    def close(self) -> None:
        for channel in self._channels.values():
            channel.close()


def export_csv(channel: Channel, t0: int | None = None, t1: int | None = None) -> str:
    """Render a channel's entries in the log/export CSV format.

    The output round-trips: importing it and exporting again is
    byte-identical.
    """
    lo = t0 if t0 is not None else -(2**62)
    hi = t1 if t1 is not None else 2**62
    lines = [CSV_HEADER]
    lines.extend(e.csv_line() for e in channel.range(lo, hi))
    return "\n".join(lines) + "\n"


def import_csv(text: str) -> list[Entry]:
    """Parse a document produced by :func:`export_csv`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("missing or unexpected CSV header")
    return [parse_entry_line(ln) for ln in lines[1:]]
