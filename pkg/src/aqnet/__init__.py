"""aqnet: a self-contained PM sensor network (simulator, channel-feed
server, cleaning, and spatio-temporal analytics)."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AveragingWindow,
    GeoPoint,
    NodeDescriptor,
    NodeKind,
    Parameter,
    SensorSample,
    TimeSeries,
    align_pair,
    haversine_distance,
    window_average,
)
