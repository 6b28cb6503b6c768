"""Inverse-distance-weighted spatial interpolation over station values.

A query point takes the weighted mean of station values with weights
1 / distance^power (power 2 by default), which makes every estimate a convex
combination of the inputs. Queries closer than half a meter to a station
return that station's value exactly instead of letting the weight blow up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import InsufficientDataError
from .model import GeoPoint, NodeDescriptor, haversine_distance

COINCIDENCE_METERS = 0.5


def idw_estimate(
    stations: list[tuple[GeoPoint, float]], query: GeoPoint, power: float = 2.0
) -> float:
    """Estimate the value at ``query`` from (location, value) stations."""
    if not stations:
        raise InsufficientDataError("idw needs at least one station", needed=1, got=0)
    weights = []
    for location, value in stations:
        if not math.isfinite(value):
            raise ValueError(f"station value must be finite, got {value!r}")
        distance = haversine_distance(query, location)
        if distance < COINCIDENCE_METERS:
            return value
        weights.append((1.0 / distance**power, value))
    total = sum(w for w, _ in weights)
    estimate = sum(w * v for w, v in weights) / total
    # a weighted mean is convex; keep float rounding from leaking outside
    lo = min(v for _, v in stations)
    hi = max(v for _, v in stations)
    return min(max(estimate, lo), hi)


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lon_min: float
    lat_max: float
    lon_max: float

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("bounding box must have positive extent")

    @classmethod
    def around(cls, points: list[GeoPoint], pad_fraction: float = 0.15) -> "BoundingBox":
        """Envelope of the points, padded on every side."""
        lats = [p.lat for p in points]
        lons = [p.lon for p in points]
        pad_lat = max((max(lats) - min(lats)) * pad_fraction, 1e-4)
        pad_lon = max((max(lons) - min(lons)) * pad_fraction, 1e-4)
        return cls(
            lat_min=min(lats) - pad_lat,
            lon_min=min(lons) - pad_lon,
            lat_max=max(lats) + pad_lat,
            lon_max=max(lons) + pad_lon,
        )


@dataclass(frozen=True)
class InterpolationGrid:
    """IDW raster at one timestamp: row 0 is the northernmost band, column 0
    the westernmost; each cell holds the estimate at its center."""

    bbox: BoundingBox
    rows: int
    cols: int
    timestamp: int
    parameter: str
    power: float
    values: tuple[tuple[float, ...], ...]
    stations: tuple[tuple[NodeDescriptor, float], ...]

    def cell_center(self, row: int, col: int) -> GeoPoint:
        dlat = (self.bbox.lat_max - self.bbox.lat_min) / self.rows
        dlon = (self.bbox.lon_max - self.bbox.lon_min) / self.cols
        return GeoPoint(
            lat=self.bbox.lat_max - (row + 0.5) * dlat,
            lon=self.bbox.lon_min + (col + 0.5) * dlon,
        )

    def value_range(self) -> tuple[float, float]:
        flat = [v for row in self.values for v in row]
        return min(flat), max(flat)

    def max_cell(self) -> tuple[int, int]:
        best = (0, 0)
        for i, row in enumerate(self.values):
            for j, v in enumerate(row):
                if v > self.values[best[0]][best[1]]:
                    best = (i, j)
        return best

    def to_feature_collection(self) -> dict:
        """Cell centers as a GeoJSON-style FeatureCollection."""
        features = []
        for i in range(self.rows):
            for j in range(self.cols):
                center = self.cell_center(i, j)
                features.append(
                    {
                        "type": "Feature",
                        "geometry": {"type": "Point", "coordinates": [center.lon, center.lat]},
                        "properties": {
                            "parameter": self.parameter,
                            "value": self.values[i][j],
                            "timestamp": self.timestamp,
                            "row": i,
                            "col": j,
                        },
                    }
                )
        return {"type": "FeatureCollection", "features": features}

    def metadata(self) -> dict:
        return {
            "bbox": [self.bbox.lat_min, self.bbox.lon_min, self.bbox.lat_max, self.bbox.lon_max],
            "rows": self.rows,
            "cols": self.cols,
            "power": self.power,
            "parameter": self.parameter,
            "timestamp": self.timestamp,
            "stations": [
                {
                    "node_id": node.node_id,
                    "display_name": node.display_name,
                    "lat": node.location.lat,
                    "lon": node.location.lon,
                    "value": value,
                }
                for node, value in self.stations
            ],
        }

    def to_json(self) -> str:
        return json.dumps({"meta": self.metadata(), "cells": self.to_feature_collection()})

    def to_csv(self) -> str:
        lines = [",".join(str(v) for v in row) for row in self.values]
        return "\n".join(lines) + "\n"


def idw_grid(
    stations: list[tuple[NodeDescriptor, float]],
    bbox: BoundingBox,
    rows: int,
    cols: int,
    timestamp: int,
    parameter: str,
    power: float = 2.0,
) -> InterpolationGrid:
    """Rasterize IDW estimates on a uniform lat/lon lattice of cell centers."""
    if rows < 2 or cols < 2:
        raise ValueError(f"grid needs rows, cols >= 2, got {rows}x{cols}")
    if not stations:
        raise InsufficientDataError(
            f"no station data at timestamp {timestamp}", needed=1, got=0
        )
    located = [(node.location, value) for node, value in stations]
    dlat = (bbox.lat_max - bbox.lat_min) / rows
    dlon = (bbox.lon_max - bbox.lon_min) / cols
    values = []
    for i in range(rows):
        lat = bbox.lat_max - (i + 0.5) * dlat
        row = []
        for j in range(cols):
            lon = bbox.lon_min + (j + 0.5) * dlon
            row.append(idw_estimate(located, GeoPoint(lat, lon), power=power))
        values.append(tuple(row))
    return InterpolationGrid(
        bbox=bbox,
        rows=rows,
        cols=cols,
        timestamp=timestamp,
        parameter=parameter,
        power=power,
        values=tuple(values),
        stations=tuple(stations),
    )
