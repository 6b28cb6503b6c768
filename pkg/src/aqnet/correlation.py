"""Kendall rank correlation between node pairs.

tau = (concordant - discordant) / (concordant + discordant), counted over
all unordered index pairs; a pair is concordant when (x_i - x_j)(y_i - y_j)
is positive, discordant when negative, and excluded entirely when zero.
Note the tied-pair exclusion from the denominator: results differ from the
common tau-b variant on tied data, so library implementations are not a
drop-in substitute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AveragingWindow, TimeSeries, align_pair

_BLOCK_ROWS = 256  # bounds pairwise-comparison memory on long series

DEFAULT_MIN_PAIRS = 30


def concordance_counts(pairs: list[tuple[float, float]]) -> tuple[int, int]:
    """Exact concordant/discordant counts over all C(n,2) index pairs.

    Counted blockwise with vectorized sign comparisons; every unordered pair
    (i, j) is visited exactly once via symmetry, so the counts match a
    two-loop enumeration exactly.
    """
    x = np.asarray([p[0] for p in pairs], dtype=np.float64)
    y = np.asarray([p[1] for p in pairs], dtype=np.float64)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("pairs must be finite")
    n = len(x)
    concordant = 0
    discordant = 0
    for lo in range(0, n, _BLOCK_ROWS):
        hi = min(lo + _BLOCK_ROWS, n)
        sx = np.sign(x[lo:hi, None] - x[None, :]).astype(np.int8)
        sy = np.sign(y[lo:hi, None] - y[None, :]).astype(np.int8)
        product = sx * sy
        concordant += int((product > 0).sum())
        discordant += int((product < 0).sum())
    # each unordered pair was seen twice (z_ij = z_ji); diagonal terms are zero
    return concordant // 2, discordant // 2


def kendall_tau(pairs: list[tuple[float, float]]) -> float | None:
    """tau in [-1, 1], or None when undefined (fewer than two observations,
    or every pair tied)."""
    if len(pairs) < 2:
        return None
    concordant, discordant = concordance_counts(pairs)
    if concordant + discordant == 0:
        return None
    return (concordant - discordant) / (concordant + discordant)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise tau between nodes for one parameter and window.

    ``tau[i][j]`` is None when the pair's overlap is below ``min_pairs``
    (spurious-coefficient guard). The diagonal is definitional: 1.0 whenever
    the node has at least two pairable points, regardless of min_pairs.
    """

    node_ids: tuple[str, ...]
    parameter: str
    window_seconds: int
    tau: tuple[tuple[float | None, ...], ...]
    pair_counts: tuple[tuple[int, ...], ...]
    min_pairs: int = DEFAULT_MIN_PAIRS

    def tau_range(self) -> tuple[float, float] | None:
        """(min, max) over present off-diagonal entries."""
        present = [
            v
            for i, row in enumerate(self.tau)
            for j, v in enumerate(row)
            if i != j and v is not None
        ]
        if not present:
            return None
        return min(present), max(present)

    def to_csv(self) -> str:
        lines = ["node_id," + ",".join(self.node_ids)]
        for node_id, row in zip(self.node_ids, self.tau):
            cells = ["" if v is None else str(round(v, 6)) for v in row]
            lines.append(node_id + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def pair_counts_csv(self) -> str:
        lines = ["node_id," + ",".join(self.node_ids)]
        for node_id, row in zip(self.node_ids, self.pair_counts):
            lines.append(node_id + "," + ",".join(str(c) for c in row))
        return "\n".join(lines) + "\n"


def correlation_matrix(
    series_by_node: dict[str, TimeSeries],
    window: AveragingWindow,
    min_pairs: int = DEFAULT_MIN_PAIRS,
) -> CorrelationMatrix:
    """Tau between every unordered node pair of window-averaged series.

    Each off-diagonal entry is computed once and mirrored, so the matrix is
    symmetric by construction; permuting the input order permutes rows and
    columns identically.
    """
    if len(series_by_node) < 2:
        raise ValueError("correlation needs at least two nodes")
    node_ids = list(series_by_node.keys())
    parameters = {s.parameter for s in series_by_node.values()}
    if len(parameters) != 1:
        raise ValueError("all series must carry the same parameter")
    n = len(node_ids)
    tau: list[list[float | None]] = [[None] * n for _ in range(n)]
    counts: list[list[int]] = [[0] * n for _ in range(n)]
    for i, a in enumerate(node_ids):
        own = align_pair(series_by_node[a], series_by_node[a], window)
        counts[i][i] = len(own)
        if len(own) >= 2:
            tau[i][i] = 1.0
        for j in range(i + 1, n):
            b = node_ids[j]
            pairs = align_pair(series_by_node[a], series_by_node[b], window)
            counts[i][j] = counts[j][i] = len(pairs)
            if len(pairs) < min_pairs:
                continue
            value = kendall_tau(pairs)
            tau[i][j] = tau[j][i] = value
    return CorrelationMatrix(
        node_ids=tuple(node_ids),
        parameter=next(iter(parameters)).value,
        window_seconds=window.seconds,
        tau=tuple(tuple(row) for row in tau),
        pair_counts=tuple(tuple(row) for row in counts),
        min_pairs=min_pairs,
    )
