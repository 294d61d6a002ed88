"""Paths, charge-drop schedules, and the structural path classes.

A path is a sequence of vertex ids and a schedule is a sequence of
nonnegative drops of the same length whose first entry is zero.  Gains at
vertices are measured relative to the first vertex, so they may leave
``[-B, B]``; battery clipping only enters through :func:`alpha_path`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .graph import (
    NEG_INF,
    EnergyGraph,
    InvalidChargeError,
    NoSuchArcError,
    ScheduleShapeError,
)


class Monotonicity(enum.Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"
    NOT_MONOTONE = "not-monotone"


class ArcBound(enum.Enum):
    FIRST = "first-arc-bounded"
    LAST = "last-arc-bounded"
    BOTH = "both-arc-bounded"
    NONE = "not-arc-bounded"

    @property
    def first(self) -> bool:
        return self in (ArcBound.FIRST, ArcBound.BOTH)

    @property
    def last(self) -> bool:
        return self in (ArcBound.LAST, ArcBound.BOTH)


@dataclass(frozen=True)
class PathClass:
    monotone: Monotonicity
    bound: ArcBound
    is_funnel: bool


def arc_gains(graph: EnergyGraph, path: Sequence[int]) -> list[int]:
    """Gains of the consecutive arcs of ``path``; raises if an arc is missing."""
    if len(path) == 0:
        raise ScheduleShapeError("a path needs at least one vertex")
    lookup = graph.gains.item
    out = []
    for u, v in zip(path, path[1:]):
        g = lookup(u, v)
        if g == NEG_INF:
            raise NoSuchArcError(f"no arc {u} -> {v}")
        out.append(int(g))
    return out


def _check_schedule(path: Sequence[int], schedule: Sequence[int] | None) -> list[int]:
    if schedule is None:
        return [0] * len(path)
    schedule = list(schedule)
    if len(schedule) != len(path):
        raise ScheduleShapeError(
            f"schedule has {len(schedule)} entries for a path of {len(path)} vertices"
        )
    if schedule[0] != 0:
        raise ScheduleShapeError("no charge may be dropped at the first vertex")
    if any(d < 0 for d in schedule):
        raise ScheduleShapeError("charge drops must be nonnegative")
    return schedule


def prefix_gains(
    graph: EnergyGraph, path: Sequence[int], schedule: Sequence[int] | None = None
) -> list[int]:
    """Gain at every vertex of ``path`` after the scheduled drops."""
    drops = _check_schedule(path, schedule)
    out = [0]
    for g, d in zip(arc_gains(graph, path), drops[1:]):
        out.append(out[-1] + g - d)
    return out


def alpha_path(graph: EnergyGraph, path: Sequence[int], b: int) -> int | float:
    """Final charge after traversing ``path`` from charge ``b``, or ``-inf``.

    Closed form: the walk fails iff some prefix loses more than ``b`` or some
    subpath loses more than ``B``.  Otherwise the battery clips at most once
    in effect, at the highest prefix, and the answer is
    ``min(B, b + h[i*]) + (h[-1] - h[i*])`` with ``i*`` the argmax prefix.
    """
    B = graph.B
    if b == NEG_INF or not 0 <= b <= B:
        raise InvalidChargeError(f"start charge {b!r} outside [0, {B}]")
    h = prefix_gains(graph, path)
    best = h[0]
    i_star = 0
    for i, x in enumerate(h):
        if x < -b or x - best < -B:
            return NEG_INF
        if x > best:
            best, i_star = x, i
    return min(B, b + h[i_star]) + (h[-1] - h[i_star])


def alpha_profile(graph: EnergyGraph, path: Sequence[int]) -> list[int | float]:
    """``alpha_path`` for every start charge ``0..B`` from one pass over the path."""
    B = graph.B
    h = prefix_gains(graph, path)
    best, i_star, drawdown = h[0], 0, 0
    for i, x in enumerate(h):
        drawdown = max(drawdown, best - x)
        if x > best:
            best, i_star = x, i
    if drawdown > B:
        return [NEG_INF] * (B + 1)
    need = -min(h)
    tail = h[-1] - h[i_star]
    return [NEG_INF if b < need else min(B, b + h[i_star]) + tail for b in range(B + 1)]


def simulate_alpha(graph: EnergyGraph, path: Sequence[int], b: int) -> int | float:
    """Step-by-step traversal with clipping; the reference for :func:`alpha_path`."""
    if not 0 <= b <= graph.B:
        raise InvalidChargeError(f"start charge {b!r} outside [0, {graph.B}]")
    c = b
    for g in arc_gains(graph, path):
        if c + g < 0:
            return NEG_INF
        c = min(graph.B, c + g)
    return c


def is_traversable(graph: EnergyGraph, path: Sequence[int]) -> bool:
    return alpha_path(graph, path, graph.B) != NEG_INF


def is_strongly_traversable(graph: EnergyGraph, path: Sequence[int]) -> bool:
    return alpha_path(graph, path, 0) != NEG_INF


def is_ascending(graph: EnergyGraph, path: Sequence[int], schedule=None) -> bool:
    g = prefix_gains(graph, path, schedule)
    return is_traversable(graph, path) and all(0 <= x <= g[-1] for x in g)


def is_descending(graph: EnergyGraph, path: Sequence[int], schedule=None) -> bool:
    g = prefix_gains(graph, path, schedule)
    return is_traversable(graph, path) and all(0 >= x >= g[-1] for x in g)


def classify_monotone(
    graph: EnergyGraph, path: Sequence[int], schedule: Sequence[int] | None = None
) -> Monotonicity:
    """Ascending, descending, or neither.  A flat path counts as ascending."""
    if is_ascending(graph, path, schedule):
        return Monotonicity.ASCENDING
    if is_descending(graph, path, schedule):
        return Monotonicity.DESCENDING
    return Monotonicity.NOT_MONOTONE


def is_first_arc_bounded(graph: EnergyGraph, path: Sequence[int], schedule=None) -> bool:
    g = prefix_gains(graph, path, schedule)
    drops = _check_schedule(path, schedule)
    if len(path) < 2 or drops[1] != 0:
        return False
    lo, hi = min(0, g[1]), max(0, g[1])
    return all(lo <= x <= hi for x in g)


def is_last_arc_bounded(graph: EnergyGraph, path: Sequence[int], schedule=None) -> bool:
    g = prefix_gains(graph, path, schedule)
    drops = _check_schedule(path, schedule)
    if len(path) < 2 or drops[-1] != 0 or drops[-2] != 0:
        return False
    lo, hi = sorted((g[-2], g[-1]))
    return all(lo <= x <= hi for x in g)


def arc_bounded_kind(
    graph: EnergyGraph, path: Sequence[int], schedule: Sequence[int] | None = None
) -> ArcBound:
    first = is_first_arc_bounded(graph, path, schedule)
    last = is_last_arc_bounded(graph, path, schedule)
    if first and last:
        return ArcBound.BOTH
    if first:
        return ArcBound.FIRST
    if last:
        return ArcBound.LAST
    return ArcBound.NONE


def is_funnel(graph: EnergyGraph, path: Sequence[int]) -> bool:
    """Arc-bounded and free of monotone subpaths with two or three arcs."""
    if arc_bounded_kind(graph, path) is ArcBound.NONE:
        return False
    for length in (2, 3):
        for i in range(len(path) - length):
            sub = path[i : i + length + 1]
            if classify_monotone(graph, sub) is not Monotonicity.NOT_MONOTONE:
                return False
    return True


def zigzag_funnel(gains: Sequence[int]) -> bool:
    """The alternating-sign, damped-magnitude description of a funnel.

    Signs alternate and magnitudes either fall from the first arc (weakly at
    the first step, strictly after) or rise into the last arc (strictly, then
    weakly at the final step).
    """
    k = len(gains)
    if k == 0 or any(g == 0 for g in gains):
        return False
    if any((a > 0) == (b > 0) for a, b in zip(gains, gains[1:])):
        return False
    mags = [abs(g) for g in gains]
    falling = all(
        mags[i] >= mags[i + 1] if i == 0 else mags[i] > mags[i + 1] for i in range(k - 1)
    )
    rising = all(
        mags[i + 1] >= mags[i] if i == k - 2 else mags[i + 1] > mags[i] for i in range(k - 1)
    )
    return falling or rising


def classify_path(
    graph: EnergyGraph, path: Sequence[int], schedule: Sequence[int] | None = None
) -> PathClass:
    return PathClass(
        classify_monotone(graph, path, schedule),
        arc_bounded_kind(graph, path, schedule),
        is_funnel(graph, path),
    )


def funnel_decomposition(graph: EnergyGraph, path: Sequence[int]) -> list[tuple[int, int]]:
    """Greedy cover of ``path`` by inclusion-maximal funnels.

    Pieces are returned as ``(i, j)`` position pairs: the funnel is
    ``path[i : j + 1]``.  The first piece is the longest funnel starting at
    the first arc.  Each following piece is, among maximal funnels containing
    the first uncovered arc, the one reaching furthest right.
    """
    k = len(path) - 1
    if k <= 0:
        return []
    arc_gains(graph, path)

    def funnel(a: int, b: int) -> bool:
        # arcs a..b inclusive, 0-based
        return is_funnel(graph, path[a : b + 2])

    r = 0
    while r + 1 < k and funnel(0, r + 1):
        r += 1
    pieces = [(0, r + 1)]
    while r < k - 1:
        nxt = r + 1
        best = None
        for left in range(nxt, -1, -1):
            if not funnel(left, nxt):
                break
            right = nxt
            while right + 1 < k and funnel(left, right + 1):
                right += 1
            # scanning left-to-smaller keeps the widest piece among equal right ends
            if best is None or right >= best[1]:
                best = (left, right)
        left, right = best
        pieces.append((left, right + 1))
        r = right
    return pieces
