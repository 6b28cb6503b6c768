"""Matched quantile pairs for distribution comparison (QQ scatter data).

Two samples from the same distribution put every point on the diagonal;
a pure location shift displaces the whole line up or down by the shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError


@dataclass(frozen=True)
class QQPairs:
    probabilities: tuple[float, ...]
    points: tuple[tuple[float, float], ...]

    def max_abs_offset(self) -> float:
        return max(abs(qy - qx) for qx, qy in self.points)

    def to_csv(self) -> str:
        lines = ["p,quantile_x,quantile_y"]
        for p, (qx, qy) in zip(self.probabilities, self.points):
            lines.append(f"{p},{qx},{qy}")
        return "\n".join(lines) + "\n"


def qq_pairs(x, y, k: int = 100) -> QQPairs:
    """Quantiles of x and y matched at probabilities (i - 0.5) / k.

    Each quantile is linear interpolation between order statistics at
    position p * (n - 1) of the sorted sample, so both coordinate sequences
    are non-decreasing along the probability axis.
    """
    xs = np.asarray(list(x), dtype=np.float64)
    ys = np.asarray(list(y), dtype=np.float64)
    if k < 1:
        raise ValueError(f"quantile count must be >= 1, got {k}")
    for name, arr in (("x", xs), ("y", ys)):
        if arr.size < 2:
            raise InsufficientDataError(
                f"qq needs at least 2 values in {name}, got {arr.size}", needed=2, got=int(arr.size)
            )
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} contains non-finite values")
    probabilities = (np.arange(1, k + 1) - 0.5) / k
    qx = np.quantile(xs, probabilities, method="linear")
    qy = np.quantile(ys, probabilities, method="linear")
    return QQPairs(
        probabilities=tuple(float(p) for p in probabilities),
        points=tuple((float(a), float(b)) for a, b in zip(qx, qy)),
    )
