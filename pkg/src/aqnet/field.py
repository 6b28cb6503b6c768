"""Synthetic pollution field: a diurnal baseline plus localized burst events.

The field is the simulation's ground truth. Sensors sample it (with noise)
at their own locations; analyses should recover its spatial and temporal
structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .model import GeoPoint, Parameter, haversine_distance

DAY_SECONDS = 86_400


@dataclass(frozen=True)
class BurstEvent:
    """A localized, time-decaying source (firecracker-plume shape).

    Spatially a Gaussian bump of scale ``sigma`` around ``center``; in time
    it ramps linearly from ``onset`` over ``ramp`` seconds, then halves every
    ``half_life`` seconds.
    """

    center: GeoPoint
    amplitude_pm25: float
    amplitude_pm10: float
    sigma: float = 80.0
    onset: int = 0
    ramp: int = 0
    half_life: int = 21_600
    event_id: int = 0

    def __post_init__(self) -> None:
        if self.amplitude_pm25 < 0 or self.amplitude_pm10 < 0:
            raise ValueError("event amplitudes must be >= 0")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.ramp < 0:
            raise ValueError(f"ramp must be >= 0, got {self.ramp}")
        if self.half_life <= 0:
            raise ValueError(f"half_life must be > 0, got {self.half_life}")

    def amplitude(self, parameter: Parameter) -> float:
        if parameter == Parameter.PM25:
            return self.amplitude_pm25
        if parameter == Parameter.PM10:
            return self.amplitude_pm10
        return 0.0

    def time_gain(self, t: float) -> float:
        """Dimensionless activation in [0, 1+]: 0 before onset, linear ramp,
        then exponential decay with the configured half-life."""
        if t < self.onset:
            return 0.0
        if self.ramp > 0 and t < self.onset + self.ramp:
            return (t - self.onset) / self.ramp
        return 2.0 ** (-(t - self.onset - self.ramp) / self.half_life)

    def contribution(self, p: GeoPoint, t: float, parameter: Parameter) -> float:
        amp = self.amplitude(parameter)
        if amp == 0.0:
            return 0.0
        g = self.time_gain(t)
        if g == 0.0:
            return 0.0
        d = haversine_distance(p, self.center)
        return amp * math.exp(-(d * d) / (2.0 * self.sigma * self.sigma)) * g


@dataclass(frozen=True)
class PollutionField:
    """Baseline + diurnal sinusoid per PM parameter, plus burst events.

    The baselines must dominate their diurnal amplitudes so the field never
    goes negative on its own; the final value is clamped at zero anyway.
    """

    baseline_pm25: float
    baseline_pm10: float
    diurnal_amplitude_pm25: float = 0.0
    diurnal_amplitude_pm10: float = 0.0
    diurnal_phase: int = 0
    events: tuple[BurstEvent, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        if self.baseline_pm25 - self.diurnal_amplitude_pm25 < 0:
            raise ValueError("pm25 baseline must be >= its diurnal amplitude")
        if self.baseline_pm10 - self.diurnal_amplitude_pm10 < 0:
            raise ValueError("pm10 baseline must be >= its diurnal amplitude")

    def baseline(self, parameter: Parameter) -> float:
        return self.baseline_pm25 if parameter == Parameter.PM25 else self.baseline_pm10

    def diurnal_amplitude(self, parameter: Parameter) -> float:
        if parameter == Parameter.PM25:
            return self.diurnal_amplitude_pm25
        return self.diurnal_amplitude_pm10

    def with_event(self, event: BurstEvent) -> "PollutionField":
        return replace(self, events=self.events + (event,))


def field_value(field_: PollutionField, p: GeoPoint, t: float, parameter: Parameter) -> float:
    """True concentration of ``parameter`` at point ``p`` and time ``t``.

    value = baseline
          + diurnal_amplitude * sin(2*pi * ((t mod day) - phase) / day)
          + sum of event contributions,
    clamped at zero.
    """
    if parameter not in (Parameter.PM25, Parameter.PM10):
        raise ValueError(f"field carries PM parameters only, got {parameter.value}")
    phase_arg = 2.0 * math.pi * ((t % DAY_SECONDS) - field_.diurnal_phase) / DAY_SECONDS
    value = field_.baseline(parameter) + field_.diurnal_amplitude(parameter) * math.sin(phase_arg)
    for ev in field_.events:
        value += ev.contribution(p, t, parameter)
    return max(0.0, value)
