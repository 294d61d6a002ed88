"""Static two-dimensional range structures over ``(k1, k2)`` pairs.

:class:`MaxRangeTree2D` is the per-tree reference structure: a merge-sort
tree over pairs sorted by ``k1``.  Every node keeps its pairs sorted by
``(k2, tag)`` plus the node maximum and minimum, which is enough for the
three query shapes the shortcut procedures ask.

The engine issues millions of small queries per pass, so it uses the batched
forms further down.  Each batched structure holds one group of pairs per tree
(all trees of one pass at once) and answers a vector of queries, one per
``(group, bound)`` pair, with numpy.  They agree with a linear scan except
for tie-breaking among equal ``k2``, which only has to be deterministic.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Hashable, Iterable, NamedTuple

import numpy as np

from .graph import NEG_INF


class RangeHit(NamedTuple):
    k1: float
    k2: float
    tag: Hashable


@dataclass
class _Node:
    lo: int
    hi: int  # half-open slice of the k1-sorted pair list
    by_k2: list  # (k2, tag sort key, tag, k1), sorted
    best: tuple  # entry with max k2, smallest tag among those
    min_k2: float
    children: tuple[int, int]


class MaxRangeTree2D:
    """Immutable merge-sort tree answering max-``k2`` and quadrant queries."""

    def __init__(self, pairs: Iterable[tuple]):
        items = []
        for i, p in enumerate(pairs):
            k1, k2 = p[0], p[1]
            tag = p[2] if len(p) > 2 else i
            items.append((float(k1), float(k2), tag))
        items.sort(key=lambda t: (t[0], _tag_key(t[2])))
        self._k1 = [t[0] for t in items]
        self._items = items
        self._nodes: list[_Node] = []
        if items:
            self._build(0, len(items))

    @classmethod
    def build(cls, pairs: Iterable[tuple]) -> "MaxRangeTree2D":
        return cls(pairs)

    def __len__(self) -> int:
        return len(self._items)

    def _build(self, lo: int, hi: int) -> int:
        idx = len(self._nodes)
        self._nodes.append(None)  # type: ignore[arg-type]
        if hi - lo == 1:
            k1, k2, tag = self._items[lo]
            by_k2 = [(k2, _tag_key(tag), tag, k1)]
            left = right = -1
        else:
            mid = (lo + hi) // 2
            left = self._build(lo, mid)
            right = self._build(mid, hi)
            by_k2 = sorted(self._nodes[left].by_k2 + self._nodes[right].by_k2, key=lambda t: t[:2])
        top = by_k2[-1][0]
        first_top = bisect_left([t[0] for t in by_k2], top)
        best = by_k2[first_top]
        self._nodes[idx] = _Node(lo, hi, by_k2, best, by_k2[0][0], (left, right))
        return idx

    def _canonical(self, lo: int, hi: int) -> list[_Node]:
        """Nodes whose slices partition ``[lo, hi)`` of the k1-sorted list."""
        out: list[_Node] = []
        if not self._nodes or lo >= hi:
            return out
        stack = [0]
        while stack:
            node = self._nodes[stack.pop()]
            if node.hi <= lo or node.lo >= hi:
                continue
            if lo <= node.lo and node.hi <= hi:
                out.append(node)
                continue
            left, right = node.children
            stack.extend((right, left))
        return out

    def _slice_k1(self, lo: float, hi: float) -> tuple[int, int]:
        return bisect_left(self._k1, lo), bisect_right(self._k1, hi)

    @staticmethod
    def _pick(cands: list[tuple]) -> RangeHit | None:
        if not cands:
            return None
        k2, _, tag, k1 = min(cands, key=lambda t: (-t[0], t[1]))
        if k2 == NEG_INF:
            return None
        return RangeHit(k1, k2, tag)

    def max_k2_in_k1_range(self, lo: float, hi: float) -> RangeHit | None:
        """Pair with the largest ``k2`` among ``lo <= k1 <= hi``; ``None`` if none."""
        if lo > hi:
            return None
        a, b = self._slice_k1(lo, hi)
        return self._pick([n.best for n in self._canonical(a, b)])

    def max_k2_in_box(self, k1_hi: float, k2_cap: float) -> RangeHit | None:
        """Pair with the largest ``k2`` among ``k1 <= k1_hi`` and ``k2 <= k2_cap``."""
        _, b = self._slice_k1(NEG_INF, k1_hi)
        cands = []
        for node in self._canonical(0, b):
            keys = [t[0] for t in node.by_k2]
            j = bisect_right(keys, k2_cap)
            if j == 0:
                continue
            top = keys[j - 1]
            cands.append(node.by_k2[bisect_left(keys, top)])
        return self._pick(cands)

    def exists_in_quadrant(self, k1_lo: float, k2_cap: float) -> bool:
        """Whether some pair has ``k1 >= k1_lo`` and ``k2 <= k2_cap``."""
        a = bisect_left(self._k1, k1_lo)
        return any(n.min_k2 <= k2_cap for n in self._canonical(a, len(self._k1)))


def _tag_key(tag):
    return (0, tag) if isinstance(tag, (int, float)) else (1, repr(tag))


# ---------------------------------------------------------------------------
# Batched kernels
# ---------------------------------------------------------------------------


class _GroupedSearch:
    """Sorted keys per group, searchable for many ``(group, bound)`` pairs at once.

    Keys equal to ``+inf`` mark excluded slots; they sort last and are never
    counted.  All finite keys must be integers (or halves) well inside the
    exact float range.
    """

    def __init__(self, keys: np.ndarray):
        keys = np.asarray(keys, dtype=np.float64)
        self.G, self.m = keys.shape
        self.order = np.argsort(keys, axis=1, kind="stable")
        self.sorted = np.take_along_axis(keys, self.order, axis=1)
        finite = self.sorted[np.isfinite(self.sorted)]
        if finite.size:
            self.lo, self.hi = float(finite.min()) - 1.0, float(finite.max()) + 1.0
        else:
            self.lo, self.hi = -1.0, 1.0
        span = self.hi - self.lo + 1.0
        self.span = span
        shifted = np.where(np.isfinite(self.sorted), self.sorted, self.hi) - self.lo
        self.flat = (shifted + np.arange(self.G)[:, None] * span).ravel()

    def count_le(self, group: np.ndarray, bound: np.ndarray) -> np.ndarray:
        """Number of non-excluded keys ``<= bound`` in each queried group."""
        b = np.clip(np.asarray(bound, dtype=np.float64), self.lo, self.hi - 0.5)
        q = (b - self.lo) + group * self.span
        return np.searchsorted(self.flat, q, side="right") - group * self.m

    def count_lt(self, group: np.ndarray, bound: np.ndarray) -> np.ndarray:
        """Number of non-excluded keys ``< bound`` in each queried group."""
        b = np.clip(np.asarray(bound, dtype=np.float64), self.lo, self.hi - 0.5)
        q = (b - self.lo) + group * self.span
        return np.searchsorted(self.flat, q, side="left") - group * self.m


class BatchedPrefixMax:
    """For every group, the running maximum of value rows in key order.

    ``keys`` has shape ``(G, m)`` and ``values`` shape ``(G, m, X)``: pair
    ``j`` of group ``g`` has key ``keys[g, j]`` and a whole row of ``k2``
    values, one per output column.  :meth:`query` returns, for each query,
    the column-wise maximum over pairs whose key is ``<= bound`` and the index
    ``j`` of a pair attaining it.
    """

    def __init__(self, keys: np.ndarray, values: np.ndarray):
        self.search = _GroupedSearch(keys)
        order = self.search.order
        svals = np.take_along_axis(values, order[:, :, None], axis=1)
        self.pm = np.maximum.accumulate(svals, axis=1)
        pos = np.where(svals == self.pm, np.arange(order.shape[1])[None, :, None], -1)
        last = np.maximum.accumulate(pos, axis=1)
        self.arg = np.take_along_axis(np.broadcast_to(order[:, :, None], last.shape), last, axis=1)

    def query(self, group: np.ndarray, bound: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cnt = self.search.count_le(group, bound)
        X = self.pm.shape[2]
        idx = np.maximum(cnt - 1, 0)
        best = self.pm[group, idx]
        arg = self.arg[group, idx]
        empty = cnt <= 0
        if empty.any():
            best = best.copy()
            best[empty] = NEG_INF
            arg = arg.copy()
            arg[empty] = -1
        assert best.shape[-1] == X
        return best, arg


class BatchedBoxMax:
    """Max ``k2`` subject to ``k1 <= q1`` and ``k2 <= q2``, per group.

    Pairs are sorted by ``k2``; a sparse table of ``k1`` minima lets binary
    lifting find the last pair (largest ``k2``) among the first
    ``count(k2 <= q2)`` whose ``k1`` is within bound.  Invalid pairs carry
    ``k2 = +inf``.
    """

    def __init__(self, k1: np.ndarray, k2: np.ndarray):
        k1 = np.asarray(k1, dtype=np.float64)
        k2 = np.asarray(k2, dtype=np.float64)
        self.search = _GroupedSearch(k2)
        order = self.search.order
        self.k2s = self.search.sorted
        k1s = np.take_along_axis(k1, order, axis=1)
        k1s = np.where(np.isfinite(self.k2s), k1s, np.inf)
        self.k1s = k1s
        G, m = k1s.shape
        self.levels = [k1s]
        step = 1
        while step < m:
            prev = self.levels[-1]
            nxt = prev.copy()
            nxt[:, : m - step] = np.minimum(prev[:, : m - step], prev[:, step:])
            self.levels.append(nxt)
            step *= 2
        self.flat_levels = [lv.ravel() for lv in self.levels]

    def query(self, group, q1, q2) -> tuple[np.ndarray, np.ndarray]:
        group = np.asarray(group)
        q1 = np.asarray(q1, dtype=np.float64)
        m = self.k1s.shape[1]
        base = group * m
        pos = self.search.count_le(group, q2)
        for lvl in range(len(self.levels) - 1, -1, -1):
            width = 1 << lvl
            cand = pos - width
            ok = cand >= 0
            block = np.take(self.flat_levels[lvl], base + np.maximum(cand, 0))
            pos = np.where(ok & (block > q1), cand, pos)
        j = pos - 1
        flat = base + np.maximum(j, 0)
        hit = (j >= 0) & (np.take(self.flat_levels[0], flat) <= q1)
        best = np.where(hit, np.take(self.k2s, flat), NEG_INF)
        arg = np.where(hit, np.take(self.search.order, flat), -1)
        return best, arg


class BatchedQuadrant:
    """Existence of a pair with ``k1 >= q1`` and ``k2 <= q2``, per group.

    Invalid pairs carry ``k1 = +inf`` so they sort last and are excluded from
    the suffix minima.
    """

    def __init__(self, k1: np.ndarray, k2: np.ndarray):
        k1 = np.asarray(k1, dtype=np.float64)
        k2 = np.asarray(k2, dtype=np.float64)
        self.search = _GroupedSearch(k1)
        order = self.search.order
        k2s = np.take_along_axis(k2, order, axis=1)
        k2s = np.where(np.isfinite(self.search.sorted), k2s, np.inf)
        G, m = k2s.shape
        rev = k2s[:, ::-1]
        smin = np.minimum.accumulate(rev, axis=1)[:, ::-1]
        pos = np.where(k2s == smin, np.arange(m)[None, :], m)
        first = np.minimum.accumulate(pos[:, ::-1], axis=1)[:, ::-1]
        self.smin = np.concatenate([smin, np.full((G, 1), np.inf)], axis=1)
        arg = np.take_along_axis(order, np.minimum(first, m - 1), axis=1)
        self.arg = np.concatenate([arg, np.full((G, 1), -1)], axis=1)

    def query(self, group, q1, q2) -> tuple[np.ndarray, np.ndarray]:
        group = np.asarray(group)
        start = self.search.count_lt(group, q1)
        val = self.smin[group, start]
        found = val <= np.asarray(q2, dtype=np.float64)
        return found, np.where(found, self.arg[group, start], -1)
