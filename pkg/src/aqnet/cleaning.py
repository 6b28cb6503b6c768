"""Outlier rejection for raw feeds via density clustering, then averaging.

Complete (pm25, pm10, temperature, humidity) vectors are z-scored per batch
and labeled by neighborhood density: a vector is core when at least min_pts
vectors (itself included) lie within eps of it, border when it is within eps
of some core vector, and noise otherwise. Noise vectors are outliers and are
dropped from all four parameter series at once: a bad reading poisons the
whole vector. The labeling is a pure function of the point set, so shuffling
the input never changes which vectors are dropped. High-humidity PM
overestimation shows up as low-density regions in the joint space and is
removed by the same mechanism, without a hard humidity cutoff.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .model import AveragingWindow, Parameter, SensorSample, TimeSeries, window_average

logger = logging.getLogger(__name__)

_FEATURES = (Parameter.PM25, Parameter.PM10, Parameter.TEMPERATURE, Parameter.HUMIDITY)
_BLOCK_ROWS = 256

DEFAULT_BATCH_SECONDS = 86_400


class OutlierLabel(enum.Enum):
    CORE = "core"
    BORDER = "border"
    NOISE = "noise"
    INCOMPLETE = "incomplete"


@dataclass(frozen=True)
class FeatureVector:
    """One sample as a point in joint feature space."""

    timestamp: int
    features: tuple[float | None, float | None, float | None, float | None]

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.features)

    @classmethod
    def from_sample(cls, sample: SensorSample) -> "FeatureVector":
        return cls(
            timestamp=sample.timestamp,
            features=tuple(sample.value(p) for p in _FEATURES),
        )


@dataclass(frozen=True)
class ClusterParams:
    """eps is a radius in z-scored feature space; min_pts counts the vector
    itself. Defaults flag single-coordinate spikes of ~10 batch sigmas while
    leaving smooth diurnal trajectories untouched."""

    eps: float = 0.5
    min_pts: int = 8

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.min_pts < 2:
            raise ValueError(f"min_pts must be >= 2, got {self.min_pts}")


def detect_outliers(vectors: list[FeatureVector], params: ClusterParams) -> list[OutlierLabel]:
    """Label every vector; incomplete vectors are flagged and skipped.

    With fewer than min_pts complete vectors there is no density to measure,
    so cleaning is skipped: all complete vectors are labeled core and a
    warning is logged.
    """
    labels = [OutlierLabel.INCOMPLETE] * len(vectors)
    complete_idx = [i for i, v in enumerate(vectors) if v.complete]
    if len(complete_idx) < params.min_pts:
        if complete_idx:
            logger.warning(
                "only %d complete vectors (< min_pts=%d): outlier detection skipped",
                len(complete_idx),
                params.min_pts,
            )
        for i in complete_idx:
            labels[i] = OutlierLabel.CORE
        return labels

    data = np.asarray([vectors[i].features for i in complete_idx], dtype=np.float64)
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std[std == 0.0] = 1.0  # constant feature: contributes zero distance
    z = (data - mean) / std

    n = z.shape[0]
    eps_sq = params.eps * params.eps
    sq_norms = (z * z).sum(axis=1)

    def blocks():
        # squared-distance identity; float negatives near zero only strengthen <=
        for lo in range(0, n, _BLOCK_ROWS):
            hi = min(lo + _BLOCK_ROWS, n)
            d_sq = sq_norms[lo:hi, None] + sq_norms[None, :] - 2.0 * (z[lo:hi] @ z.T)
            yield lo, hi, d_sq <= eps_sq

    neighbor_counts = np.empty(n, dtype=np.int64)
    for lo, hi, within in blocks():
        neighbor_counts[lo:hi] = within.sum(axis=1)
    core = neighbor_counts >= params.min_pts

    near_core = np.zeros(n, dtype=bool)
    for lo, hi, within in blocks():
        near_core[lo:hi] = (within & core[None, :]).any(axis=1)
    for pos, i in enumerate(complete_idx):
        if core[pos]:
            labels[i] = OutlierLabel.CORE
        elif near_core[pos]:
            labels[i] = OutlierLabel.BORDER
        else:
            labels[i] = OutlierLabel.NOISE
    return labels


def _split_batches(samples: list[SensorSample], batch_seconds: int) -> list[list[SensorSample]]:
    batches: dict[int, list[SensorSample]] = {}
    for s in samples:
        batches.setdefault(s.timestamp // batch_seconds, []).append(s)
    return [batches[k] for k in sorted(batches)]


def clean(
    node_id: str,
    samples: list[SensorSample],
    params: ClusterParams = ClusterParams(),
    batch_seconds: int = DEFAULT_BATCH_SECONDS,
    rh_max: float | None = None,
) -> dict[Parameter, TimeSeries]:
    """Drop outlier vectors and return one series per parameter.

    Samples are processed in epoch-aligned batches (a day of raw data by
    default) so the z-scoring tracks slow regime changes. Incomplete vectors
    cannot be judged and pass through. ``rh_max``, when set, additionally
    drops vectors with humidity above the cutoff before clustering.
    """
    ordered = sorted(samples, key=lambda s: s.timestamp)
    kept: list[SensorSample] = []
    for batch in _split_batches(ordered, batch_seconds):
        if rh_max is not None:
            batch = [s for s in batch if s.humidity is None or s.humidity <= rh_max]
        vectors = [FeatureVector.from_sample(s) for s in batch]
        labels = detect_outliers(vectors, params)
        kept.extend(s for s, lbl in zip(batch, labels) if lbl != OutlierLabel.NOISE)

    points: dict[Parameter, dict[int, float]] = {p: {} for p in _FEATURES}
    for s in kept:
        for p in _FEATURES:
            v = s.value(p)
            if v is not None:
                points[p][s.timestamp] = v  # duplicate timestamps: last wins
    return {
        p: TimeSeries(node_id=node_id, parameter=p, points=tuple(sorted(points[p].items())))
        for p in _FEATURES
    }


def pipeline(
    node_id: str,
    samples: list[SensorSample],
    window: AveragingWindow,
    params: ClusterParams = ClusterParams(),
    batch_seconds: int = DEFAULT_BATCH_SECONDS,
    rh_max: float | None = None,
) -> dict[Parameter, TimeSeries]:
    """Clean first, then window-average, in that order: a spike gets
    dropped instead of being smeared into its bucket's mean."""
    cleaned = clean(node_id, samples, params=params, batch_seconds=batch_seconds, rh_max=rh_max)
    return {p: window_average(series, window) for p, series in cleaned.items()}
