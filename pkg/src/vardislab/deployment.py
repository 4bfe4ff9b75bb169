"""Node deployments and the distance-derived packet-loss model.

Losses are modelled per ordered node pair as an independent drop
probability q[i][j], derived from pairwise distance through a step-wise
PER-versus-distance curve anchored at measured points: reception is
essentially loss-free well inside the transmission range, degrades in
steps from 255 m (10 %) through 263 m (20 %), 273 m (50 %) and 280 m
(80 %), and is impossible from the interference range (294 m) outwards.

Line deployments place K nodes on a row, either with a fixed spacing
(chosen to hit a target per-link PER) or equidistantly with the two end
nodes pinned 1120 m apart. Grid deployments are K x K lattices with the
same two density conventions.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

PER_ANCHORS: tuple[tuple[float, float], ...] = (
    (0.0, 0.0),
    (255.0, 0.10),
    (263.0, 0.20),
    (273.0, 0.50),
    (280.0, 0.80),
    (294.0, 1.00),
)

_ANCHOR_DISTANCES = [d for d, _ in PER_ANCHORS]
_ANCHOR_LOSSES = [p for _, p in PER_ANCHORS]

# link length that yields a target per-link PER
SPACING_FOR_PER = {0.10: 255.0, 0.20: 263.0, 0.50: 273.0, 0.80: 280.0}

DEFAULT_SPAN_M = 1120.0

LINE_FIXED = "line-fixed"
LINE_VARIABLE = "line-variable"
GRID_FIXED = "grid-fixed"
GRID_VARIABLE = "grid-variable"

DEPLOYMENT_KINDS = (LINE_FIXED, LINE_VARIABLE, GRID_FIXED, GRID_VARIABLE)


def per_from_distance(distance_m: float) -> float:
    """Packet error rate of a link of the given length."""
    if distance_m < 0:
        raise ValueError("distance must be non-negative")
    idx = bisect_right(_ANCHOR_DISTANCES, distance_m) - 1
    return _ANCHOR_LOSSES[idx]


@dataclass(frozen=True)
class Deployment:
    """Node positions plus the reference producer/consumer designation."""

    kind: str
    k: int
    positions: tuple[tuple[float, float], ...]
    spacing_m: float
    producer: int
    consumer: int

    @property
    def node_count(self) -> int:
        return len(self.positions)


def loss_matrix(positions, per_fn=per_from_distance) -> np.ndarray:
    """Per-ordered-pair drop probabilities; q[i][i] = 0."""
    n = len(positions)
    q = np.zeros((n, n))
    for i in range(n):
        xi, yi = positions[i]
        for j in range(i + 1, n):
            xj, yj = positions[j]
            p = per_fn(math.hypot(xi - xj, yi - yj))
            q[i, j] = p
            q[j, i] = p
    return q


def spacing_for_per(per: float) -> float:
    try:
        return SPACING_FOR_PER[round(per, 4)]
    except KeyError:
        raise ValueError(
            f"no calibrated link length for PER {per}; "
            f"known targets: {sorted(SPACING_FOR_PER)}"
        ) from None


def build_deployment(kind: str, k: int, *, per: float | None = None,
                     span_m: float = DEFAULT_SPAN_M) -> tuple[Deployment, np.ndarray]:
    """Construct node positions for a deployment and its loss matrix.

    Fixed-density kinds take `per`, the target per-link packet error rate;
    variable-density kinds take `span_m`, the end-to-end extent.
    """
    if kind not in DEPLOYMENT_KINDS:
        raise ValueError(f"unknown deployment kind {kind!r}")
    if k < 2:
        raise ValueError("deployments need at least 2 nodes per line/side")

    if kind in (LINE_FIXED, GRID_FIXED):
        if per is None:
            raise ValueError(f"{kind} requires a target per-link PER")
        spacing = spacing_for_per(per)
    else:
        spacing = span_m / (k - 1)

    if kind in (LINE_FIXED, LINE_VARIABLE):
        positions = tuple((i * spacing, 0.0) for i in range(k))
        producer, consumer = 0, k - 1
    else:
        # row-major lattice; reference pair sits on opposite corners:
        # producer lower-right, consumer upper-left
        positions = tuple(
            (x * spacing, y * spacing) for y in range(k) for x in range(k)
        )
        producer = k - 1
        consumer = k * (k - 1)

    dep = Deployment(kind, k, positions, spacing, producer, consumer)
    return dep, loss_matrix(positions)
