"""Brute-force ground truth and validators.

The oracle answers charge questions on the product graph whose states are
``(vertex, charge)`` pairs, one per integer charge level.  Path enumerators
walk all simple paths with incremental pruning.  Nothing here is used by the
solver itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .graph import NEG_INF, POS_INF, EnergyGraph, EnergyGraphError, normalize
from .paths import (
    ArcBound,
    Monotonicity,
    _check_schedule,
    alpha_path,
    alpha_profile,
    arc_bounded_kind,
    arc_gains,
    classify_monotone,
    is_traversable,
    prefix_gains,
    zigzag_funnel,
)
from .witness import Derivation, Shortcut, WitnessError, WitnessTooLongError, unwrap

DEFAULT_MAX_STATES = 400_000


class OracleTooLargeError(EnergyGraphError):
    """The instance has too many product states or vertices for brute force."""


# ---------------------------------------------------------------------------
# product graph
# ---------------------------------------------------------------------------


def _product(graph: EnergyGraph, max_states: int) -> csr_matrix:
    n, B = graph.n, graph.B
    N = n * (B + 1)
    if N > max_states:
        raise OracleTooLargeError(f"{N} product states exceed the bound {max_states}")
    rows, cols = [], []
    charges = np.arange(B + 1)
    for u, v, g in graph.arcs():
        ok = charges + g >= 0
        c = charges[ok]
        rows.append(u * (B + 1) + c)
        cols.append(v * (B + 1) + np.minimum(B, c + g))
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=np.int64)
    return csr_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(N, N))


def oracle_alpha_all_pairs(graph: EnergyGraph, b: Optional[int] = None,
                           max_states: int = DEFAULT_MAX_STATES) -> np.ndarray:
    """``alpha_b(s, t)`` for every pair, ``b = B`` by default.

    Returns a float matrix of integers and ``-inf``.
    """
    n, B = graph.n, graph.B
    b = B if b is None else int(b)
    if not 0 <= b <= B:
        raise EnergyGraphError(f"start charge {b} outside [0, {B}]")
    A = _product(graph, max_states)
    out = np.full((n, n), NEG_INF)
    for s in range(n):
        reached = breadth_first_order(A, s * (B + 1) + b, directed=True,
                                      return_predecessors=False)
        v, c = np.divmod(reached, B + 1)
        np.maximum.at(out[s], v, c.astype(np.float64))
    return out


def oracle_alpha_b(graph: EnergyGraph, s: int, t: int, b: int,
                   max_states: int = DEFAULT_MAX_STATES) -> int | float:
    """A single ``alpha_b(s, t)`` value."""
    return _as_value(oracle_alpha_all_pairs(graph, b, max_states)[s, t])


def oracle_min_initial(graph: EnergyGraph, max_states: int = DEFAULT_MAX_STATES) -> np.ndarray:
    """``beta_0(s, t)``: least start charge at ``s`` that reaches ``t``; ``+inf`` if none.

    Searches backwards from every state of ``t`` in the reversed product graph.
    """
    n, B = graph.n, graph.B
    A = _product(graph, max_states).T.tocsr()
    out = np.full((n, n), POS_INF)
    for t in range(n):
        seen = np.zeros(n * (B + 1), dtype=bool)
        for c in range(B + 1):
            if seen[t * (B + 1) + c]:
                continue
            reached = breadth_first_order(A, t * (B + 1) + c, directed=True,
                                          return_predecessors=False)
            seen[reached] = True
        v, c = np.divmod(np.flatnonzero(seen), B + 1)
        np.minimum.at(out[:, t], v, c.astype(np.float64))
    return out


def _as_value(x: float) -> int | float:
    return int(x) if np.isfinite(x) else float(x)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnumeratedPath:
    path: tuple[int, ...]
    gain: int
    kind: object  # Monotonicity for monotone paths, ArcBound for funnels


def _check_size(graph: EnergyGraph, max_n: int) -> None:
    if graph.n > max_n:
        raise OracleTooLargeError(f"enumeration limited to n <= {max_n}, got {graph.n}")


def enumerate_simple_monotone(graph: EnergyGraph, max_n: int = 8) -> list[EnumeratedPath]:
    """All simple paths with at least one arc that are monotone under the zero schedule.

    Depth-first search tracks the prefix gain, its running extremes and the
    deepest drop below a running maximum; a prefix that has been both above
    and below its start can never become monotone and is cut off.
    """
    _check_size(graph, max_n)
    G = graph.gains
    B = graph.B
    n = graph.n
    out: list[EnumeratedPath] = []

    def dfs(path, used, h, lo, hi, top):
        u = path[-1]
        for v in range(n):
            g = G[u, v]
            if used[v] or g == NEG_INF:
                continue
            h2 = h + int(g)
            lo2, hi2 = min(lo, h2), max(hi, h2)
            if h2 - top < -B:  # some subpath loses more than B
                continue
            if lo2 < 0 < hi2:
                continue
            p = path + (v,)
            if lo2 >= 0 and h2 == hi2:
                out.append(EnumeratedPath(p, h2, Monotonicity.ASCENDING))
            elif hi2 <= 0 and h2 == lo2:
                out.append(EnumeratedPath(p, h2, Monotonicity.DESCENDING))
            used[v] = True
            dfs(p, used, h2, lo2, hi2, max(top, h2))
            used[v] = False

    for s in range(n):
        used = [False] * n
        used[s] = True
        dfs((s,), used, 0, 0, 0, 0)
    return out


def enumerate_simple_funnels(graph: EnergyGraph, max_n: int = 7) -> list[EnumeratedPath]:
    """All simple funnels, tagged with their arc-bound kind.

    Prefixes that already break the zig-zag shape are pruned, since every
    subpath of a funnel is again a funnel.
    """
    _check_size(graph, max_n)
    G = graph.gains
    n = graph.n
    out: list[EnumeratedPath] = []

    def dfs(path, gains, used):
        u = path[-1]
        for v in range(n):
            g = G[u, v]
            if used[v] or g == NEG_INF:
                continue
            gs = gains + [int(g)]
            if not zigzag_funnel(gs):
                continue
            p = path + (v,)
            out.append(EnumeratedPath(p, sum(gs), arc_bounded_kind(graph, p)))
            used[v] = True
            dfs(p, gs, used)
            used[v] = False

    for s in range(n):
        used = [False] * n
        used[s] = True
        dfs((s,), [], used)
    return out


# ---------------------------------------------------------------------------
# domination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: tuple[int, ...]
    gain: int
    stored: float
    table: str


def check_domination(source, enumeration: Iterable[EnumeratedPath]) -> list[Violation]:
    """Every enumerated path whose table entry is below its gain.

    ``source`` is an ``n x n`` matrix (or anything with an ``M`` matrix) for
    monotone paths, or a store with ``first`` / ``last`` tables for funnels.
    A funnel bounded at both ends needs only one of the two tables.
    """
    out: list[Violation] = []
    has_bounded = hasattr(source, "first") and hasattr(source, "last")
    M = None
    if not has_bounded:
        M = source.M if hasattr(source, "M") else np.asarray(source)
    for item in enumeration:
        p = item.path
        if isinstance(item.kind, ArcBound):
            if not has_bounded:
                raise TypeError("funnel domination needs a bounded-path store")
            vals = []
            if item.kind.first:
                vals.append(("first", source.first[p[0], p[1], p[-1]]))
            if item.kind.last:
                vals.append(("last", source.last[p[0], p[-2], p[-1]]))
            if not vals or max(v for _, v in vals) < item.gain:
                name, stored = max(vals, key=lambda t: t[1]) if vals else ("none", NEG_INF)
                out.append(Violation(p, item.gain, float(stored), name))
        else:
            table = M if M is not None else source.mono
            stored = table[p[0], p[-1]]
            if stored < item.gain:
                out.append(Violation(p, item.gain, float(stored), "mono"))
    return out


# ---------------------------------------------------------------------------
# classification checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Claim:
    """What a table entry says about the path behind it.

    ``kind`` is ``"monotone"``, ``"first"`` or ``"last"``.  ``split`` is the
    index in the path where the bounding arc (possibly a whole unwrapped
    shortcut) ends for ``"first"`` or starts for ``"last"``; it defaults to
    ``1`` and ``len(path) - 2``.  With ``exact`` the scheduled gain must equal
    ``gain``, otherwise it must be at least ``gain``.
    """

    kind: str
    gain: int
    exact: bool = True
    split: Optional[int] = None
    monotone: Optional[Monotonicity] = None


def canonical_drop_schedule(graph: EnergyGraph, path: Sequence[int]) -> list[int]:
    """Greedy drops that keep every prefix gain at or below zero, plus a
    final drop down to the lowest prefix.

    The greedy part drops as little as possible, so every prefix is as high
    as any schedule allows while staying at or below zero; the final drop
    then makes the last vertex the lowest.  A path that is descending under
    any schedule is descending under this one, and with the largest final
    gain.
    """
    drops = [0]
    h = 0
    low = 0
    for g in arc_gains(graph, path):
        h += g
        d = max(0, h)
        drops.append(d)
        h -= d
        low = min(low, h)
    if len(drops) > 1:
        drops[-1] += h - low
    return drops


def verify_classification(graph: EnergyGraph, path: Sequence[int],
                          schedule: Optional[Sequence[int]], claim: Claim) -> bool:
    """Recompute the class and scheduled gain of ``path`` and compare to ``claim``."""
    try:
        drops = _check_schedule(path, schedule)
        h = prefix_gains(graph, path, drops)
    except EnergyGraphError:
        return False
    if len(path) < 2 and claim.kind != "monotone" and claim.split is None:
        return False
    final = h[-1]
    if claim.exact and final != claim.gain:
        return False
    if not claim.exact and final < claim.gain:
        return False
    if not is_traversable(graph, path):
        return False
    if claim.kind == "monotone":
        cls = classify_monotone(graph, path, drops)
        if cls is Monotonicity.NOT_MONOTONE:
            return False
        if final < -graph.B:
            return False
        if claim.monotone is not None and cls is not claim.monotone:
            # a flat path is both; classify_monotone reports it as ascending
            return final == 0 and all(x == 0 for x in h)
        return True
    # Without a split the bounding arc is the literal first/last arc and the
    # no-drop rules apply.  With a split the bounding arc is an unwrapped
    # shortcut whose own drops may land at its end, so only the envelope counts.
    if claim.kind == "first":
        k = 1 if claim.split is None else claim.split
        # an explicit split of 0 means the bounding arc is a zero-gain stay
        if not (1 if claim.split is None else 0) <= k < len(path):
            return False
        if claim.split is None and drops[1] != 0:
            return False
        lo, hi = min(0, h[k]), max(0, h[k])
        return all(lo <= x <= hi for x in h)
    if claim.kind == "last":
        k = len(path) - 2 if claim.split is None else claim.split
        if not 0 <= k < len(path) - (1 if claim.split is None else 0):
            return False
        if claim.split is None and (drops[-1] != 0 or drops[-2] != 0):
            return False
        lo, hi = sorted((h[k], h[-1]))
        return all(lo <= x <= hi for x in h)
    raise ValueError(f"unknown claim kind {claim.kind!r}")


def gm_profile(node: Derivation) -> tuple[list, list[int], list[int]]:
    """Arc witnesses, drops and prefix gains of a derivation's path in ``G^M``."""
    arcs, drops = node.expand()
    h = [0]
    for arc, d in zip(arcs, drops[1:]):
        h.append(h[-1] + arc.gain - d)
    return arcs, drops, h


def check_gm_entry(node: Derivation, kind: str, value: float, B: int) -> Optional[str]:
    """Check a derivation at the level of ``G^M``; returns a reason or ``None``.

    Here the bounding arc is a single arc of ``G^M``, so the definitions
    apply literally.
    """
    arcs, drops, h = gm_profile(node)
    if drops[0] != 0 or any(d < 0 for d in drops):
        return "malformed schedule"
    if h[-1] != value:
        return f"scheduled gain {h[-1]} differs from stored {value}"
    if kind == "mono":
        asc = all(0 <= x <= h[-1] for x in h)
        desc = all(0 >= x >= h[-1] for x in h) and h[-1] >= -B
        return None if asc or desc else "not monotone in G^M"
    if kind == "first":
        if drops[1] != 0:
            return "drop at the second vertex"
        lo, hi = min(0, h[1]), max(0, h[1])
        return None if all(lo <= x <= hi for x in h) else "outside the first-arc envelope"
    if kind == "last":
        if len(drops) >= 2 and (drops[-1] or drops[-2]):
            return "drop at one of the last two vertices"
        lo, hi = sorted((h[-2], h[-1]))
        return None if all(lo <= x <= hi for x in h) else "outside the last-arc envelope"
    raise ValueError(kind)


@dataclass(frozen=True)
class AuditFailure:
    table: str
    key: tuple
    reason: str


def shortcut_graph(M: np.ndarray, B: int) -> EnergyGraph:
    """``G^M`` as a graph: shortcut gains as arcs, zero diagonal included."""
    g = np.array(M, dtype=np.float64)
    np.fill_diagonal(g, 0.0)
    return EnergyGraph(g, B)


def _gm_vertices(node: Derivation) -> list[int]:
    arcs, _ = node.expand()
    return [node.src] + [a.dst for a in arcs]


class _NestedChecker:
    """Checks every shortcut nested inside a derivation, once per object.

    Each nested shortcut must be monotone with the recorded gain at its own
    level; this is the induction that carries soundness from ``G^M`` down to
    ``G``.
    """

    def __init__(self, B: int):
        self.B = B
        self.done: dict[int, Optional[str]] = {}
        self.keep: list[Derivation] = []  # holds checked nodes so their ids stay unique

    def __call__(self, node: Derivation) -> Optional[str]:
        stack = [node]
        while stack:
            cur = stack.pop()
            arcs, _ = cur.expand()
            for arc in arcs:
                if not isinstance(arc, Shortcut) or id(arc.node) in self.done:
                    continue
                reason = check_gm_entry(arc.node, "mono", arc.gain, self.B)
                self.done[id(arc.node)] = reason
                self.keep.append(arc.node)
                if reason is not None:
                    return f"nested shortcut {arc!r}: {reason}"
                stack.append(arc.node)
        return None


def charge_consequence(graph: EnergyGraph, path: Sequence[int], kind: str, value: int,
                       bound_gain: Optional[float] = None) -> Optional[str]:
    """The charge guarantee an entry hands to Stage II, checked on the path in ``G``.

    A monotone entry of value ``v`` promises ``alpha_b >= min(B, b + v)`` for
    every start charge ``b`` with ``b + v >= 0``.  A first-arc-bounded entry
    whose bounding arc is not positive promises ``alpha_B >= B + v``.
    """
    B = graph.B
    if kind == "mono":
        alphas = alpha_profile(graph, path)
        for b in range(max(0, -value), B + 1):
            if alphas[b] < min(B, b + value):
                return f"alpha from charge {b} below {min(B, b + value)}"
        return None
    if kind == "first" and bound_gain is not None and bound_gain <= 0:
        if alpha_path(graph, path, B) < B + value:
            return f"alpha from full charge below {B + value}"
    return None


def _audit_entry(graph, gm_graph, nested, node, name, value, cap, bound_gain, cache=None):
    reason = check_gm_entry(node, name, value, graph.B)
    if reason is None and gm_graph is not None:
        claim = Claim({"mono": "monotone"}.get(name, name), value)
        if not verify_classification(gm_graph, _gm_vertices(node), node.expand()[1], claim):
            reason = "failed classification in G^M"
    if reason is None:
        reason = nested(node)
    if reason is None:
        # The unwrapped path in G depends only on the derivation, not on M.
        def check():
            memo = None if cache is None else cache.paths
            return _check_g_entry(graph, node, name, value, cap, bound_gain, memo)

        if cache is None:
            reason = check()
        else:
            reason = cache.lookup(("G", name, value, id(node), bound_gain), (node,), check)
    return reason


class AuditCache:
    """Verdicts already reached for one graph, shared across audits.

    Successive snapshots of a run repeat most entries unchanged; an entry is
    re-checked only if its table, value or witness object differs.  Checked
    objects are kept referenced so that their ids are never reused.
    """

    def __init__(self, B: int):
        self.nested = _NestedChecker(B)
        self.entries: dict[tuple, Optional[str]] = {}
        self.keep: list[object] = []
        self.paths: dict = {}  # expansions of derivation nodes, see witness.flatten

    def lookup(self, key: tuple, owners: tuple, compute) -> Optional[str]:
        if key not in self.entries:
            self.entries[key] = compute()
            self.keep.extend(owners)
        return self.entries[key]


def audit_store(graph: EnergyGraph, store, cap: int = 1_000_000,
                tables: Sequence[str] = ("mono", "first", "last"),
                cache: Optional[AuditCache] = None) -> list[AuditFailure]:
    """Unwrap and verify every finite entry of a bounded-path store.

    ``graph`` must be the normalized input graph.  Each entry is classified
    against the definitions in ``G^M`` (the graph of the store's shortcut
    table), every nested shortcut is checked the same way at its own level,
    and the path unwrapped into ``G`` must exist, be traversable, have the
    stored scheduled gain and honor :func:`charge_consequence`.
    """
    out: list[AuditFailure] = []
    gm_graph = shortcut_graph(store.M, store.B)
    cache = cache or AuditCache(graph.B)
    nested = cache.nested
    arrays = {"mono": (store.mono, store.mono_w), "first": (store.first, store.first_w),
              "last": (store.last, store.last_w)}
    for name in tables:
        vals, wits = arrays[name]
        for key in zip(*np.nonzero(np.isfinite(vals))):
            key = tuple(int(k) for k in key)
            node = wits[key]
            if node is None:
                out.append(AuditFailure(name, key, "missing witness"))
                continue
            bound_gain = store.M[key[0], key[1]] if name == "first" else None
            value = int(vals[key])
            reason = cache.lookup(
                (id(store.M), name, key, value, id(node)), (store.M, node),
                lambda: _audit_entry(graph, gm_graph, nested, node, name, value, cap,
                                     bound_gain, cache))
            if reason is not None:
                out.append(AuditFailure(name, key, reason))
    return out


def _check_g_entry(graph, node, name, value, cap, bound_gain=None,
                   memo: Optional[dict] = None) -> Optional[str]:
    try:
        path, drops = unwrap(node, cap, memo)
    except WitnessTooLongError:
        return "too long"
    except WitnessError as exc:
        return f"unwrap failed: {exc}"
    if path[0] != node.src or path[-1] != node.dst:
        return "endpoints differ"
    try:
        h = prefix_gains(graph, path, drops)
    except EnergyGraphError as exc:
        return f"not a path in G: {exc}"
    if h[-1] != value:
        return f"scheduled gain {h[-1]} in G differs from {value}"
    if not is_traversable(graph, path):
        return "not traversable in G"
    return charge_consequence(graph, path, name, value, bound_gain)


def audit_table(graph: EnergyGraph, table, cap: int = 1_000_000,
                cache: Optional[AuditCache] = None) -> list[AuditFailure]:
    """Verify every finite shortcut entry as a monotone derivation (see :func:`audit_store`)."""
    out: list[AuditFailure] = []
    cache = cache or AuditCache(graph.B)
    nested = cache.nested
    M, W = table.M, table.witnesses
    for x, y in zip(*np.nonzero(np.isfinite(M))):
        x, y = int(x), int(y)
        value = int(M[x, y])
        arc = W[x, y]
        if arc is None:
            out.append(AuditFailure("M", (x, y), "missing witness"))
            continue
        if arc.src != x or arc.dst != y or arc.gain != value:
            out.append(AuditFailure("M", (x, y), "witness does not match the entry"))
            continue
        if not isinstance(arc, Shortcut):
            continue  # an input arc or the zero diagonal
        node: Derivation = arc.node
        reason = cache.lookup(
            ("M", x, y, value, id(node)), (node,),
            lambda: _audit_entry(graph, None, nested, node, "mono", value, cap, None, cache))
        if reason is not None:
            out.append(AuditFailure("M", (x, y), reason))
    return out


def prepare(graph: EnergyGraph) -> EnergyGraph:
    """The normalized graph the solver works on; oracles accept either form."""
    return normalize(graph)


@dataclass
class Comparison:
    """Entrywise comparison of a computed table with the oracle's.

    ``unsound`` lists pairs where the computed value claims more than is
    achievable; ``missed`` lists pairs where it claims less.  For ``beta``
    tables the inequalities flip, since lower is better there.
    """

    unsound: list[tuple[int, int, float, float]]
    missed: list[tuple[int, int, float, float]]

    @property
    def sound(self) -> bool:
        return not self.unsound

    @property
    def exact(self) -> bool:
        return not self.unsound and not self.missed


def compare_tables(computed: np.ndarray, truth: np.ndarray, beta: bool = False) -> Comparison:
    computed = np.asarray(computed, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    over, under = (computed < truth, computed > truth) if beta else (computed > truth,
                                                                       computed < truth)

    def rows(mask):
        return [(int(s), int(t), float(computed[s, t]), float(truth[s, t]))
                for s, t in zip(*np.nonzero(mask))]

    return Comparison(rows(over), rows(under))
