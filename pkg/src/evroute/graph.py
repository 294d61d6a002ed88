"""Energy graphs with integer arc gains and a battery capacity.

Gains live in dense ``float64`` matrices.  Every finite entry is an integer
(checked on construction) and a missing arc is ``-inf``.  IEEE negative
infinity already behaves like the sentinel we need: it absorbs under addition
with finite values and compares below every finite value.  Values stay far
below 2**53, so integer arithmetic on them is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

NEG_INF = float("-inf")
POS_INF = float("inf")


class EnergyGraphError(ValueError):
    """Base class for malformed graphs, paths and schedules."""


class InvalidCapacityError(EnergyGraphError):
    pass


class InvalidChargeError(EnergyGraphError):
    pass


class NoSuchArcError(EnergyGraphError):
    pass


class ScheduleShapeError(EnergyGraphError):
    pass


def is_finite(value: float) -> bool:
    return value != NEG_INF and value != POS_INF


def as_gain(value: float) -> int | float:
    """Return ``value`` as a Python int, or the infinite sentinel unchanged."""
    if is_finite(value):
        return int(value)
    return float(value)


@dataclass(frozen=True)
class EnergyGraph:
    """A directed graph on vertices ``0..n-1``.

    ``gains[u, v]`` is the gain of arc ``uv`` or ``-inf`` when there is no arc.
    The matrix is copied and made read-only on construction.
    """

    gains: np.ndarray
    B: int

    def __post_init__(self) -> None:
        if int(self.B) != self.B or self.B <= 0:
            raise InvalidCapacityError(f"capacity must be a positive integer, got {self.B!r}")
        g = np.array(self.gains, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise EnergyGraphError(f"gain matrix must be square, got shape {g.shape}")
        if np.isnan(g).any() or (g == POS_INF).any():
            raise EnergyGraphError("gain matrix may only contain integers and -inf")
        finite = g[np.isfinite(g)]
        if finite.size and not np.array_equal(finite, np.round(finite)):
            raise EnergyGraphError("finite gains must be integers")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "B", int(self.B))

    @property
    def n(self) -> int:
        return self.gains.shape[0]

    def gain(self, u: int, v: int) -> int | float:
        return as_gain(self.gains[u, v])

    def arcs(self) -> list[tuple[int, int, int]]:
        """All finite arcs as ``(u, v, g)`` triples in row-major order."""
        us, vs = np.nonzero(np.isfinite(self.gains))
        return [(int(u), int(v), int(self.gains[u, v])) for u, v in zip(us, vs)]

    @property
    def m(self) -> int:
        return int(np.isfinite(self.gains).sum())

    def reversed(self) -> "EnergyGraph":
        return EnergyGraph(self.gains.T.copy(), self.B)

    def with_gains(self, gains: np.ndarray) -> "EnergyGraph":
        return EnergyGraph(gains, self.B)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EnergyGraph):
            return NotImplemented
        return self.B == other.B and np.array_equal(self.gains, other.gains)

    def __hash__(self) -> int:
        return hash((self.B, self.gains.tobytes()))


def from_arcs(n: int, arcs: Iterable[tuple[int, int, int]], B: int) -> EnergyGraph:
    """Build a graph from ``(u, v, g)`` triples; parallel arcs keep the max gain."""
    g = np.full((n, n), NEG_INF)
    for u, v, w in arcs:
        if not (0 <= u < n and 0 <= v < n):
            raise EnergyGraphError(f"arc ({u}, {v}) has an endpoint outside 0..{n - 1}")
        g[u, v] = max(g[u, v], w)
    return EnergyGraph(g, B)


def path_graph(gains: Iterable[int], B: int) -> EnergyGraph:
    """The path ``0 -> 1 -> ... -> k`` with the given arc gains."""
    gains = list(gains)
    return from_arcs(len(gains) + 1, [(i, i + 1, g) for i, g in enumerate(gains)], B)


def normalize(graph: EnergyGraph) -> EnergyGraph:
    """Drop arcs that can never be traversed and cap gains at ``B``.

    An arc with gain below ``-B`` needs more charge than the battery holds, and
    a gain above ``B`` can never add more than ``B``.  The diagonal is left as
    is; the shortcut engine installs its own zero diagonal.
    """
    B = graph.B
    g = graph.gains.copy()
    off = ~np.eye(graph.n, dtype=bool)
    g[off & (g < -B)] = NEG_INF
    g[off & (g > B)] = B
    return EnergyGraph(g, B)


def is_normalized(graph: EnergyGraph) -> bool:
    g = graph.gains
    off = ~np.eye(graph.n, dtype=bool)
    finite = np.isfinite(g) & off
    return bool(np.all((g[finite] >= -graph.B) & (g[finite] <= graph.B)))
