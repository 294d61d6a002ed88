"""Stage I: the shortcut table ``M`` and the procedures that improve it.

Every procedure reads a frozen snapshot of its inputs and then writes all of
its improvements at once, so results never depend on iteration order.  The
range queries of the pseudocode run as batched numpy kernels from
:mod:`evroute.rangetree`; Python loops only walk over chunks of the middle
index to bound memory.

With ``EngineConfig.witnesses`` set, every improved entry also records a
derivation (see :mod:`evroute.witness`) that expands to a concrete path and
charge-drop schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .graph import NEG_INF, EnergyGraph, normalize
from .rangetree import BatchedBoxMax, BatchedPrefixMax, BatchedQuadrant
from .witness import (
    Clamp,
    DropAtEnd,
    Flat,
    GraphArc,
    Join,
    Single,
    Stay,
    Trim,
    arc_witness_of,
    unwrap,
)

# Elements per temporary array before a kernel splits its work into chunks.
CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class EngineConfig:
    """Iteration counts, sampling rates and switches of the Stage I engine.

    ``None`` fields take their size-dependent default when the engine runs.
    """

    c_r: float = 2.0
    alpha: float = 0.5
    c_o: float = 1.0
    c_T: float = 4.0
    c_S: float = 1.0
    inner_iterations: Optional[int] = None
    outer_iterations: Optional[int] = None
    long_gate: Optional[float] = None
    funnel_s: Optional[int] = None
    funnel_p: Optional[float] = None
    seed: Optional[int] = 0
    exhaustive: bool = False
    witnesses: bool = False
    witness_cap: int = 1_000_000
    debug_checks: bool = False
    observer: Optional[Callable[[str, "BoundedPathStore"], None]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        for name in ("long_gate", "funnel_p"):
            p = getattr(self, name)
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.inner_iterations is not None and self.inner_iterations < 1:
            raise ValueError("inner_iterations must be at least 1")
        if self.outer_iterations is not None and self.outer_iterations < 1:
            raise ValueError("outer_iterations must be at least 1")
        if self.funnel_s is not None and self.funnel_s < 1:
            raise ValueError("funnel_s must be at least 1")
        if self.witness_cap < 1:
            raise ValueError("witness_cap must be positive")

    # -- derived parameters -------------------------------------------------
    def r(self, n: int) -> int:
        if self.inner_iterations is not None:
            return self.inner_iterations
        return max(1, math.ceil(self.c_r * n**self.alpha))

    def outer(self, n: int) -> int:
        if self.outer_iterations is not None:
            return self.outer_iterations
        return max(1, math.ceil(self.c_o * (math.log2(max(n, 1)) + 1) ** 2))

    def gate(self, n: int) -> float:
        if self.exhaustive:
            return 1.0
        if self.long_gate is not None:
            return self.long_gate
        return min(1.0, math.log(max(n, 1)) / self.r(n))

    def s(self, n: int) -> int:
        if self.funnel_s is not None:
            return self.funnel_s
        return max(1, math.ceil(n ** (2.0 / 3.0)))

    def p_funnel(self, n: int) -> float:
        if self.exhaustive:
            return 1.0
        if self.funnel_p is not None:
            return self.funnel_p
        return min(1.0, self.c_S * math.ceil(math.log(max(n, 1))) * self.s(n) / n)

    def levels(self, n: int) -> int:
        if n < 2:
            return 1
        x = n ** (1.0 - self.alpha) * math.log(n) ** 2
        return max(1, math.ceil(math.log2(x)))

    def p_level(self, n: int, i: int) -> float:
        if self.exhaustive:
            return 1.0
        if n < 2:
            return 1.0
        return min(1.0, self.c_T * math.log(n) ** 2 / (2**i * n**self.alpha))


@dataclass
class ShortcutTable:
    """The shortcut matrix ``M`` with optional per-entry arc witnesses."""

    M: np.ndarray
    B: int
    witnesses: Optional[np.ndarray] = None
    generation: int = 0

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @classmethod
    def initial(cls, graph: EnergyGraph, witnesses: bool = False) -> "ShortcutTable":
        """Arcs of ``graph`` plus the zero diagonal; ``-inf`` elsewhere."""
        M = np.array(graph.gains, dtype=np.float64)
        np.fill_diagonal(M, 0.0)
        W = None
        if witnesses:
            W = np.empty(M.shape, dtype=object)
            for u, v in zip(*np.nonzero(np.isfinite(M))):
                u, v = int(u), int(v)
                W[u, v] = Stay(u) if u == v else GraphArc(u, v, int(M[u, v]))
        return cls(M, graph.B, W, 0)

    def copy(self) -> "ShortcutTable":
        W = None if self.witnesses is None else self.witnesses.copy()
        return ShortcutTable(self.M.copy(), self.B, W, self.generation)


@dataclass
class BoundedPathStore:
    """The three path tables built against one shortcut table.

    ``mono[x, y]`` is ``D[x][y]``, ``first[x, y, z]`` is ``D[xy][z]`` and
    ``last[x, y, z]`` is ``D[x][yz]``.
    """

    table: ShortcutTable
    mono: np.ndarray
    first: np.ndarray
    last: np.ndarray
    mono_w: Optional[np.ndarray] = None
    first_w: Optional[np.ndarray] = None
    last_w: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.mono.shape[0]

    @property
    def M(self) -> np.ndarray:
        return self.table.M

    @property
    def B(self) -> int:
        return self.table.B

    @property
    def has_witnesses(self) -> bool:
        return self.mono_w is not None

    def snapshot(self) -> "BoundedPathStore":
        def cp(a):
            return None if a is None else a.copy()

        return BoundedPathStore(
            self.table,
            self.mono.copy(),
            self.first.copy(),
            self.last.copy(),
            cp(self.mono_w),
            cp(self.first_w),
            cp(self.last_w),
        )


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _chunk(per_item: int) -> int:
    return max(1, CHUNK_ELEMENTS // max(1, per_item))


def _blocks(items: np.ndarray, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _ask(structure, group: np.ndarray, bound: np.ndarray, mask: np.ndarray):
    """Run a prefix-max query only where ``mask`` holds; ``-inf`` elsewhere."""
    Q = group.shape[0]
    X = structure.pm.shape[2]
    best = np.full((Q, X), NEG_INF)
    arg = np.full((Q, X), -1, dtype=np.int64)
    idx = np.flatnonzero(mask)
    if idx.size:
        b, a = structure.query(group[idx], bound[idx])
        best[idx] = b
        arg[idx] = a
    return best, arg


class _Acc:
    """Running strict maximum with attached integer arguments."""

    def __init__(self, shape, nargs: int):
        self.val = np.full(shape, NEG_INF)
        self.args = [np.full(shape, -1, dtype=np.int64) for _ in range(nargs)]

    def merge(self, index, cand: np.ndarray, *args) -> None:
        cur = self.val[index]
        better = cand > cur
        if not better.any():
            return
        self.val[index] = np.where(better, cand, cur)
        for store, a in zip(self.args, args):
            store[index] = np.where(better, np.broadcast_to(a, cand.shape), store[index])


def _reduce0(cand: np.ndarray, *args):
    """Maximum over axis 0 (first maximal position wins) and the matching args."""
    k = np.argmax(cand, axis=0)
    val = np.take_along_axis(cand, k[None], axis=0)[0]
    out = [k]
    for a in args:
        a = np.broadcast_to(a, cand.shape)
        out.append(np.take_along_axis(a, k[None], axis=0)[0])
    return val, out


def _commit(values, wits, index, cand, args, builder) -> bool:
    """Write strict improvements of ``cand`` into ``values[index]``.

    ``builder(pos, *arg_values)`` is called for each improved local position
    when witnesses are recorded; it must only read snapshot arrays.
    """
    cur = values[index]
    better = cand > cur
    if not better.any():
        return False
    values[index] = np.where(better, cand, cur)
    if wits is not None:
        w = wits[index]
        for pos in zip(*np.nonzero(better)):
            pos = tuple(int(p) for p in pos)
            w[pos] = builder(pos, float(cand[pos]), *(int(a[pos]) for a in args))
        wits[index] = w
    return True


def _int(x: float) -> int:
    return int(x)


# ---------------------------------------------------------------------------
# initialization and short shortcuts
# ---------------------------------------------------------------------------


def init_ds(table: ShortcutTable) -> BoundedPathStore:
    """Trivial paths: every entry of ``M`` seeds all three tables."""
    M = table.M
    n = M.shape[0]
    mono = M.copy()
    first = np.full((n, n, n), NEG_INF)
    last = np.full((n, n, n), NEG_INF)
    idx = np.arange(n)
    first[:, idx, idx] = M  # D[xy][y]
    last[idx, idx, :] = M  # D[x][xy]
    store = BoundedPathStore(table, mono, first, last)
    if table.witnesses is not None:
        mono_w = np.empty((n, n), dtype=object)
        first_w = np.empty((n, n, n), dtype=object)
        last_w = np.empty((n, n, n), dtype=object)
        for x, y in zip(*np.nonzero(np.isfinite(M))):
            x, y = int(x), int(y)
            node = Single(table.witnesses[x, y])
            mono_w[x, y] = node
            first_w[x, y, y] = node
            last_w[x, x, y] = node
        store.mono_w, store.first_w, store.last_w = mono_w, first_w, last_w
    return store


def _two_step(a: np.ndarray, b: np.ndarray, B: int) -> np.ndarray:
    asc = (a >= 0) & (b >= 0)
    desc = np.minimum(a, 0.0) + np.minimum(b, 0.0)
    return np.where(asc, a + b, np.where(desc >= -B, desc, NEG_INF))


def _compose(A: np.ndarray, C: np.ndarray, B: int):
    """``max_y two_step(A[x, y], C[y, z])`` with the maximizing ``y``."""
    n = A.shape[0]
    val = np.full((n, n), NEG_INF)
    arg = np.zeros((n, n), dtype=np.int64)
    step = _chunk(n * n)
    for s in range(0, n, step):
        c = _two_step(A[s : s + step, :, None], C[None, :, :], B)
        k = c.argmax(axis=1)
        arg[s : s + step] = k
        val[s : s + step] = np.take_along_axis(c, k[:, None, :], axis=1)[:, 0, :]
    return val, arg


def trivial_shortcuts(store: BoundedPathStore) -> bool:
    """Two-arc shortcuts, then three-arc shortcuts built on them."""
    M, B = store.M, store.B
    M2, a2 = _compose(M, M, B)
    M3, a3 = _compose(M, M2, B)
    three = M3 > M2
    cand = np.where(three, M3, M2)
    mid = np.where(three, a3, a2)
    W = store.table.witnesses

    def build(pos, value, is_three, y):
        x, z = pos
        if not is_three:
            arcs = [W[x, y], W[y, z]]
            gains = [M[x, y], M[y, z]]
            rule = "trivial.2"
        else:
            a = int(a2[y, z])
            arcs = [W[x, y], W[y, a], W[a, z]]
            gains = [M[x, y], M[y, a], M[a, z]]
            rule = "trivial.3"
        if M[x, y] >= 0 and value >= 0:
            drops = [0] * (len(arcs) + 1)
            rule += "-asc"
        else:
            drops = [0] + [max(_int(g), 0) for g in gains]
            rule += "-desc"
        return Flat(rule, _int(value), arcs, drops)

    changed = _commit(store.mono, store.mono_w, (slice(None), slice(None)), cand,
                      (three.astype(np.int64), mid), build)
    return changed


_SHORT_RULES = ("short.asc", "short.desc", "short.desc-drop", "short.desc-peak")


def _short_hard_cases(M: np.ndarray, B: int):
    """The alternating-sign three-arc cases, as ``(value, case, y, a)`` arrays."""
    n = M.shape[0]
    fin = np.isfinite(M)
    with np.errstate(invalid="ignore"):
        keys_a = np.where(fin & (M <= 0), -M, np.inf)
        keys_b = np.where(M >= 0, M, np.inf)
        keys_c = np.where(fin, -M, np.inf)
    acc = _Acc((n, n), 3)
    ys_all = np.arange(n)
    for ys in _blocks(ys_all, _chunk(3 * n * n)):
        c = len(ys)
        V1 = M[ys][:, :, None] + M[None, :, :]  # (y, a, z): M[y][a] + M[a][z]
        V2 = np.ascontiguousarray(np.broadcast_to(M[None, :, :], (c, n, n)))
        MY = M[:, ys].T  # (y, x): M[x][y]
        m = MY.ravel()
        grp = np.repeat(np.arange(c), n)
        finite = np.isfinite(m)
        qa = finite & (m >= 0)
        qb = finite & (m <= 0)
        with np.errstate(invalid="ignore"):
            bA, aA = _ask(BatchedPrefixMax(keys_a[ys], V1), grp, m, qa)
            bB, aB = _ask(BatchedPrefixMax(keys_b[ys], V1), grp, -m, qb)
            bC, aC = _ask(BatchedPrefixMax(keys_c[ys], V2), grp, m, qb)
        shp = (c, n, n)
        bA, aA, bB, aB, bC, aC = (t.reshape(shp) for t in (bA, aA, bB, aB, bC, aC))
        mm = MY[:, :, None]
        pa = qa.reshape(c, n)[:, :, None]
        pb = qb.reshape(c, n)[:, :, None]
        with np.errstate(invalid="ignore"):
            cands = [
                (np.where(pa & (bA >= 0), mm + bA, NEG_INF), aA),
                (np.where(pb & (bB <= 0) & (mm + bB >= -B), mm + bB, NEG_INF), aB),
                (np.where(pb & (bB >= 0), np.broadcast_to(mm, shp), NEG_INF), aB),
                (np.where(pb & np.isfinite(bC), np.minimum(mm, bC), NEG_INF), aC),
            ]
        for case, (cand, arg) in enumerate(cands):
            val, (k, a) = _reduce0(cand, arg)
            acc.merge((slice(None), slice(None)), val, case, ys[k], a)
    return acc


def short_shortcuts(table: ShortcutTable, config: EngineConfig | None = None) -> ShortcutTable:
    """Dominate every monotone path of two or three arcs in ``G^M``."""
    store = init_ds(table)
    trivial_shortcuts(store)
    M, B = table.M, table.B
    acc = _short_hard_cases(M, B)
    W = table.witnesses

    def build(pos, value, case, y, a):
        x, z = pos
        arcs = [W[x, y], W[y, a], W[a, z]]
        mxy, mya, maz = _int(M[x, y]), _int(M[y, a]), _int(M[a, z])
        if case in (0, 1):
            drops = [0, 0, 0, 0]
        elif case == 2:
            drops = [0, 0, 0, mya + maz]
        else:
            drops = [0, 0, mxy + mya, max(0, maz - mxy)]
        return Flat(_SHORT_RULES[case], _int(value), arcs, drops)

    _commit(store.mono, store.mono_w, (slice(None), slice(None)), acc.val, acc.args, build)
    _observe(config, "short", store)
    return _table_from_mono(store)


def value_cap(n: int, B: int) -> int:
    """Largest shortcut value kept: no simple path gains more than ``(n - 1) * B``.

    Ascending shortcuts around positive cycles would otherwise grow without
    bound (and lose float exactness).  A capped entry is realized by dropping
    the excess charge as soon as the prefix gain passes the cap.
    """
    return max(1, n) * B


def _table_from_mono(store: BoundedPathStore) -> ShortcutTable:
    old = store.table
    cap = value_cap(store.n, store.B)
    M = np.minimum(store.mono, cap)
    np.fill_diagonal(M, 0.0)
    W = None
    if store.mono_w is not None:
        W = old.witnesses.copy()
        changed = M > old.M
        for x, y in zip(*np.nonzero(changed)):
            node = store.mono_w[x, y]
            if store.mono[x, y] > cap:
                node = Clamp("cap", cap, node, ceiling=cap)
            W[x, y] = arc_witness_of(node)
    return ShortcutTable(M, old.B, W, old.generation + 1)


def _observe(config: EngineConfig | None, stage: str, store: BoundedPathStore) -> None:
    if config is not None and config.observer is not None:
        config.observer(stage, store)


# ---------------------------------------------------------------------------
# arc-bounded paths
# ---------------------------------------------------------------------------


def breadth_search(store: BoundedPathStore) -> bool:
    """Extend first-arc-bounded paths backwards and last-arc-bounded paths forwards by one arc."""
    M = store.M
    n = store.n
    snap = store.snapshot()
    W = store.table.witnesses
    fin = np.isfinite(M)
    MT = M.T
    with np.errstate(invalid="ignore"):
        k_fa = np.where(fin & (M <= 0), -M, np.inf)
        k_fb = np.where(M >= 0, M, np.inf)
        k_la = np.where(fin.T & (MT <= 0), -MT, np.inf)
        k_lb = np.where(MT >= 0, MT, np.inf)
    changed = False
    for s in range(0, n, _chunk(4 * n * n)):
        ys = slice(s, min(n, s + _chunk(4 * n * n)))
        c = ys.stop - ys.start
        grp = np.repeat(np.arange(c), n)

        # first-arc-bounded: arc xy in front of a path y a ... z
        Fv = snap.first[ys]  # (y, a, z)
        m = M[:, ys].T.ravel()  # (y, x) -> M[x][y]
        pos = np.isfinite(m) & (m >= 0)
        neg = np.isfinite(m) & (m < 0)
        with np.errstate(invalid="ignore"):
            bA, aA = _ask(BatchedPrefixMax(k_fa[ys], Fv), grp, m, pos)
            bB, aB = _ask(BatchedPrefixMax(k_fb[ys], Fv), grp, -m, neg)
        best = np.where(pos[:, None], bA, bB)
        arg = np.where(pos[:, None], aA, aB)
        cand = (m[:, None] + best).reshape(c, n, n).transpose(1, 0, 2)
        arg = arg.reshape(c, n, n).transpose(1, 0, 2)

        def build_first(p, value, a, _s=s):
            x, yl, z = p
            y = _s + yl
            return Join("bfs.first", _int(value), W[x, y], snap.first_w[y, a, z])

        changed |= _commit(store.first, store.first_w, (slice(None), ys, slice(None)),
                           cand, (arg,), build_first)

        # last-arc-bounded: arc yx after a path z ... w y
        Lv = snap.last[:, :, ys].transpose(2, 1, 0)  # (y, w, z)
        m = M[ys, :].ravel()  # (y, x) -> M[y][x]
        pos = np.isfinite(m) & (m >= 0)
        neg = np.isfinite(m) & (m < 0)
        with np.errstate(invalid="ignore"):
            bA, aA = _ask(BatchedPrefixMax(k_la[ys], Lv), grp, m, pos)
            bB, aB = _ask(BatchedPrefixMax(k_lb[ys], Lv), grp, -m, neg)
        best = np.where(pos[:, None], bA, bB)
        arg = np.where(pos[:, None], aA, aB)
        cand = (best + m[:, None]).reshape(c, n, n).transpose(2, 0, 1)
        arg = arg.reshape(c, n, n).transpose(2, 0, 1)

        def build_last(p, value, w, _s=s):
            z, yl, x = p
            y = _s + yl
            return Join("bfs.last", _int(value), snap.last_w[z, w, y], W[y, x])

        changed |= _commit(store.last, store.last_w, (slice(None), ys, slice(None)),
                           cand, (arg,), build_last)
    _debug(store)
    return changed


def _as_index(vs) -> np.ndarray:
    return np.asarray(sorted(set(int(v) for v in vs)), dtype=np.int64)


def concatenate(store: BoundedPathStore, U, W_, X) -> bool:
    """Join arc-bounded paths whose bounding arcs point the same way.

    First-arc case: ``u v ... w`` then ``w a ... x`` with ``M[u][v] < 0``.
    Last-arc case: ``x ... a w`` then ``w ... v u`` with ``M[v][u] < 0``.
    """
    U, Wset, X = _as_index(U), _as_index(W_), _as_index(X)
    if not (len(U) and len(Wset) and len(X)):
        return False
    M = store.M
    n = store.n
    snap = store.snapshot()
    V = np.arange(n)
    fin = np.isfinite(M)
    with np.errstate(invalid="ignore"):
        k_first = np.where(fin & (M <= 0), -M, np.inf)  # [w, a]: -M[w][a]
        k_last = k_first.T.copy()  # [w, a]: -M[a][w]
    nx = len(X)
    ub = max(1, min(len(U), CHUNK_ELEMENTS // max(1, n * nx)))
    changed = False
    for Ub in _blocks(U, ub):
        per_w = len(Ub) * n * nx
        wstep = _chunk(per_w)

        acc_f = _Acc((len(Ub), n, nx), 2)
        acc_l = _Acc((len(Ub), n, nx), 2)
        Muv = M[Ub]  # (u, v)
        Mvu = M[:, Ub].T  # (u, v) -> M[v][u]
        for wc in _blocks(Wset, wstep):
            c = len(wc)
            grp = np.broadcast_to(np.arange(c)[:, None, None], (c, len(Ub), n)).ravel()

            vals = snap.first[wc][:, :, X]  # (w, a, x)
            Fuvw = snap.first[np.ix_(Ub, V, wc)].transpose(2, 0, 1)  # (w, u, v)
            valid = (Muv < 0)[None] & np.isfinite(Fuvw)
            with np.errstate(invalid="ignore"):
                bound = (Fuvw - Muv[None]).ravel()
                best, arg = _ask(BatchedPrefixMax(k_first[wc], vals), grp, bound, valid.ravel())
                cand = (Fuvw.ravel()[:, None] + best).reshape(c, len(Ub), n, nx)
            val, (k, a) = _reduce0(cand, arg.reshape(c, len(Ub), n, nx))
            acc_f.merge(Ellipsis, val, wc[k], a)

            vals = snap.last[np.ix_(X, V, wc)].transpose(2, 1, 0)  # (w, a, x): D[x][aw]
            Lwvu = snap.last[np.ix_(wc, V, Ub)].transpose(0, 2, 1)  # (w, u, v): D[w][vu]
            valid = (Mvu < 0)[None] & np.isfinite(Lwvu)
            with np.errstate(invalid="ignore"):
                bound = (Lwvu - Mvu[None]).ravel()
                best, arg = _ask(BatchedPrefixMax(k_last[wc], vals), grp, bound, valid.ravel())
                cand = (best + Lwvu.ravel()[:, None]).reshape(c, len(Ub), n, nx)
            val, (k, a) = _reduce0(cand, arg.reshape(c, len(Ub), n, nx))
            acc_l.merge(Ellipsis, val, wc[k], a)

        def build_first(p, value, w, a, _Ub=Ub):
            ui, v, xi = p
            u, x = int(_Ub[ui]), int(X[xi])
            return Join("concat.first", _int(value), snap.first_w[u, v, w], snap.first_w[w, a, x])

        changed |= _commit(store.first, store.first_w, np.ix_(Ub, V, X), acc_f.val, acc_f.args,
                           build_first)

        def build_last(p, value, w, a, _Ub=Ub):
            xi, v, ui = p
            u, x = int(_Ub[ui]), int(X[xi])
            return Join("concat.last", _int(value), snap.last_w[x, a, w], snap.last_w[w, v, u])

        changed |= _commit(store.last, store.last_w, np.ix_(X, V, Ub),
                           acc_l.val.transpose(2, 1, 0),
                           [t.transpose(2, 1, 0) for t in acc_l.args], build_last)
    _debug(store)
    return changed


def concatenate_opposite(store: BoundedPathStore, U, W_, X) -> bool:
    """Join a first-arc-bounded path with a last-arc-bounded one (and vice versa).

    Cases 1 and 3 keep the bounding arc of the first piece; cases 2 and 4
    find a pair whose combined gain is nonnegative and drop the surplus at
    the junction, giving a path of gain zero.
    """
    U, Wset, X = _as_index(U), _as_index(W_), _as_index(X)
    if not (len(U) and len(Wset) and len(X)):
        return False
    M = store.M
    n = store.n
    snap = store.snapshot()
    V = np.arange(n)
    nx = len(X)
    ub = max(1, min(len(U), CHUNK_ELEMENTS // max(1, n * nx)))
    Max = M[:, X].T  # (x, a): M[a][x]
    Mxa = M[X]  # (x, a): M[x][a]
    changed = False
    for Ub in _blocks(U, ub):
        nu = len(Ub)
        wstep = _chunk(nu * n * nx)
        acc_f = _Acc((nu, n, nx), 3)
        acc_l = _Acc((nu, n, nx), 3)
        Muv = M[Ub]
        Mvu = M[:, Ub].T
        for wc in _blocks(Wset, wstep):
            c = len(wc)
            grp = (np.arange(c)[:, None, None, None] * nx + np.arange(nx)[None, None, None, :])
            grp = np.broadcast_to(grp, (c, nu, n, nx)).ravel()

            # first-arc-bounded u v ... w, then last-arc-bounded w ... a x
            L = snap.last[np.ix_(wc, V, X)].transpose(0, 2, 1)  # (w, x, a): D[w][ax]
            ok = np.isfinite(L) & (Max >= 0)[None]
            with np.errstate(invalid="ignore"):
                box = BatchedBoxMax(np.where(ok, Max[None] - L, 0.0).reshape(c * nx, n),
                                    np.where(ok, L, np.inf).reshape(c * nx, n))
                quad = BatchedQuadrant(np.where(ok, L, np.inf).reshape(c * nx, n),
                                       np.where(ok, np.broadcast_to(Max[None], L.shape), 0.0)
                                       .reshape(c * nx, n))
            F = snap.first[np.ix_(Ub, V, wc)].transpose(2, 0, 1)  # (w, u, v)
            qv = (Muv < 0)[None] & np.isfinite(F)
            cand, case, arg = _opposite_queries(box, quad, grp, F, Muv, qv, nx, ok.any(axis=2).ravel())
            val, (k, cs, a) = _reduce0(cand, case, arg)
            acc_f.merge(Ellipsis, val, wc[k], cs, a)

            # first-arc-bounded x a ... w, then last-arc-bounded w ... v u
            Fx = snap.first[np.ix_(X, V, wc)].transpose(2, 0, 1)  # (w, x, a): D[xa][w]
            ok = np.isfinite(Fx) & (Mxa >= 0)[None]
            with np.errstate(invalid="ignore"):
                box = BatchedBoxMax(np.where(ok, Mxa[None] - Fx, 0.0).reshape(c * nx, n),
                                    np.where(ok, Fx, np.inf).reshape(c * nx, n))
                quad = BatchedQuadrant(np.where(ok, Fx, np.inf).reshape(c * nx, n),
                                       np.where(ok, np.broadcast_to(Mxa[None], Fx.shape), 0.0)
                                       .reshape(c * nx, n))
            Lw = snap.last[np.ix_(wc, V, Ub)].transpose(0, 2, 1)  # (w, u, v): D[w][vu]
            qv = (Mvu < 0)[None] & np.isfinite(Lw)
            cand, case, arg = _opposite_queries(box, quad, grp, Lw, Mvu, qv, nx, ok.any(axis=2).ravel())
            val, (k, cs, a) = _reduce0(cand, case, arg)
            acc_l.merge(Ellipsis, val, wc[k], cs, a)

        def build_first(p, value, w, case, a, _Ub=Ub):
            ui, v, xi = p
            u, x = int(_Ub[ui]), int(X[xi])
            left, right = snap.first_w[u, v, w], snap.last_w[w, a, x]
            if case == 0:
                return Join("opp.first", _int(value), left, right)
            drop = _int(snap.first[u, v, w] + snap.last[w, a, x])
            return Join("opp.first-drop", 0, left, right, junction_drop=drop)

        changed |= _commit(store.first, store.first_w, np.ix_(Ub, V, X), acc_f.val, acc_f.args,
                           build_first)

        def build_last(p, value, w, case, a, _Ub=Ub):
            xi, v, ui = p
            u, x = int(_Ub[ui]), int(X[xi])
            left, right = snap.first_w[x, a, w], snap.last_w[w, v, u]
            if case == 0:
                return Join("opp.last", _int(value), left, right)
            drop = _int(snap.first[x, a, w] + snap.last[w, v, u])
            return Join("opp.last-drop", 0, left, right, junction_drop=drop)

        changed |= _commit(store.last, store.last_w, np.ix_(X, V, Ub),
                           acc_l.val.transpose(2, 1, 0),
                           [t.transpose(2, 1, 0) for t in acc_l.args], build_last)
    _debug(store)
    return changed


def _opposite_queries(box, quad, grp, D, Mb, qv, nx, group_ok):
    """Shared query step of both halves of :func:`concatenate_opposite`.

    ``D`` is the stored gain of the bounding piece (shape ``(w, u, v)``) and
    ``Mb`` its bounding arc gain.  Returns candidate values of shape
    ``(w, u, v, x)`` with the case (0 = keep bound, 1 = drop at junction)
    and the inner vertex ``a``.  Groups without a single valid point
    (``group_ok`` false) are skipped.
    """
    shape = D.shape + (nx,)
    Dq = np.broadcast_to(D[..., None], shape).ravel()
    Mq = np.broadcast_to(Mb[None, :, :, None], shape).ravel()
    valid = np.broadcast_to(qv[..., None], shape).ravel()
    idx = np.flatnonzero(valid & group_ok[grp])
    cand = np.full(Dq.shape, NEG_INF)
    case = np.zeros(Dq.shape, dtype=np.int64)
    arg = np.full(Dq.shape, -1, dtype=np.int64)
    if idx.size:
        g, d, mb = grp[idx], Dq[idx], Mq[idx]
        best, a1 = box.query(g, d - mb, -d)
        found, a2 = quad.query(g, -d, -mb)
        c1 = d + best
        use2 = found & (0.0 > c1)
        cand[idx] = np.where(use2, 0.0, c1)
        case[idx] = use2.astype(np.int64)
        arg[idx] = np.where(use2, a2, a1)
    return cand.reshape(shape), case.reshape(shape), arg.reshape(shape)


def arc_bounded_to_monotone(store: BoundedPathStore, T) -> bool:
    """Extend arc-bounded paths whose bounding arc touches ``T`` into monotone ones."""
    T = _as_index(T)
    if not len(T):
        return False
    M, B = store.M, store.B
    n = store.n
    snap = store.snapshot()
    W = store.table.witnesses
    # arguments: case, u, v, x
    acc = _Acc((n, n), 4)
    vstep = _chunk(n * n)
    for u in T:
        u = int(u)
        Fu = snap.first[u]  # (v, x)
        Lu = snap.last[:, :, u]  # (x, v)
        row_u = M[u]  # M[u][v]
        col_u = M[:, u]  # M[v][u]
        for s in range(0, n, vstep):
            vb = np.arange(s, min(n, s + vstep))
            # first-arc-bounded u v ... x, extended by x y
            muv = row_u[vb]
            okv = np.isfinite(muv) & (muv <= 0)
            if okv.any():
                val = Fu[vb][:, :, None] + M[None, :, :]  # (v, x, y)
                mv = muv[:, None, None]
                with np.errstate(invalid="ignore"):
                    va = np.where(okv[:, None, None] & (val >= -B) & (val <= mv), val, NEG_INF)
                flat = va.reshape(-1, n)
                k = flat.argmax(axis=0)
                cand = flat[k, np.arange(n)]
                acc.merge((u, slice(None)), cand, 0, u, vb[k // n], k % n)
                vmax = val.max(axis=1)  # (v, y)
                xarg = val.argmax(axis=1)
                with np.errstate(invalid="ignore"):
                    cb = np.where(okv[:, None] & (vmax >= muv[:, None]), muv[:, None], NEG_INF)
                    cc = np.where(okv[:, None] & (vmax >= 0), vmax - muv[:, None], NEG_INF)
                kb = cb.argmax(axis=0)
                acc.merge((u, slice(None)), cb[kb, np.arange(n)], 1, u, vb[kb],
                          xarg[kb, np.arange(n)])
                acc.merge((vb, slice(None)), cc, 2, u, vb[:, None], xarg)
            # last-arc-bounded x ... v u, preceded by y x
            mvu = col_u[vb]
            okv = np.isfinite(mvu) & (mvu <= 0)
            if okv.any():
                val = M[None, :, :] + Lu[:, vb].T[:, None, :]  # (v, y, x)
                mv = mvu[:, None, None]
                with np.errstate(invalid="ignore"):
                    vd = np.where(okv[:, None, None] & (val >= -B) & (val <= mv), val, NEG_INF)
                flat = vd.transpose(0, 2, 1).reshape(-1, n)  # (v*x, y)
                k = flat.argmax(axis=0)
                cand = flat[k, np.arange(n)]
                acc.merge((slice(None), u), cand, 3, u, vb[k // n], k % n)
                vmax = val.max(axis=2)  # (v, y)
                xarg = val.argmax(axis=2)
                with np.errstate(invalid="ignore"):
                    ce = np.where(okv[:, None] & (vmax >= mvu[:, None]), mvu[:, None], NEG_INF)
                    cf = np.where(okv[:, None] & (vmax >= 0), vmax - mvu[:, None], NEG_INF)
                ke = ce.argmax(axis=0)
                acc.merge((slice(None), u), ce[ke, np.arange(n)], 4, u, vb[ke],
                          xarg[ke, np.arange(n)])
                acc.merge((slice(None), vb), cf.T, 5, u, vb[None, :], xarg.T)

    def build(p, value, case, u, v, x):
        r, c = p
        value = _int(value)
        if case <= 2:
            y = c
            inner = snap.first_w[u, v, x]
            base = _int(snap.first[u, v, x] + M[x, y])
            if case == 0:
                return Join("abm.desc", value, inner, W[x, y])
            if case == 1:
                path = Join("abm.desc", base, inner, W[x, y])
                return DropAtEnd("abm.desc-drop", value, path, base - value)
            tail = Trim("abm.trim", _int(snap.first[u, v, x] - M[u, v]), inner, head=True)
            return Join("abm.asc", value, tail, W[x, y])
        y = r
        inner = snap.last_w[x, v, u]
        base = _int(M[y, x] + snap.last[x, v, u])
        path = Join("abm.desc-last", base, W[y, x], inner)
        if case == 3:
            return path
        if case == 4:
            return Clamp("abm.desc-last-drop", value, path)
        return Trim("abm.asc-last", value, path, head=False)

    changed = _commit(store.mono, store.mono_w, (slice(None), slice(None)), acc.val, acc.args,
                      build)
    _debug(store)
    return changed


def _debug(store: BoundedPathStore) -> None:
    """Cheap structural assertions, always on: diagonal and the ``-B`` floor."""
    if np.any(np.diagonal(store.mono) < 0):
        raise AssertionError("a diagonal entry of the shortcut table went negative")
    mono = store.mono
    bad = np.isfinite(mono) & (mono < -store.B)
    if bad.any():
        raise AssertionError("a shortcut entry fell below -B")


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def _sample(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    if p >= 1.0:
        return np.arange(n)
    return np.flatnonzero(rng.random(n) < p)


def compute_funnels(table: ShortcutTable, config: EngineConfig, rng: np.random.Generator,
                    stats: dict | None = None) -> BoundedPathStore:
    """Bounded-path tables that dominate every simple funnel of ``G^M`` (w.h.p.)."""
    n = table.n
    store = init_ds(table)
    V = np.arange(n)
    rounds = math.ceil(n / config.s(n))
    _repeat(lambda: breadth_search(store), rounds, stats, "bfs")
    S = _sample(rng, n, config.p_funnel(n))
    _repeat(lambda: concatenate(store, S, S, S), math.ceil(math.log2(n)) if n > 1 else 0,
            stats, "concat")
    concatenate(store, S, S, V)
    _count(stats, "concat")
    _repeat(lambda: breadth_search(store), rounds, stats, "bfs")
    _observe(config, "funnels", store)
    return store


def _count(stats, key, k=1):
    if stats is not None:
        stats[key] = stats.get(key, 0) + k


def _repeat(step, times: int, stats, key) -> None:
    """Run ``step`` up to ``times`` times; stop at the first pass that changes nothing.

    Every pass is a deterministic function of the current tables, so a pass
    without changes means all remaining passes would be no-ops too.
    """
    for _ in range(times):
        _count(stats, key)
        if not step():
            break


def long_shortcuts(table: ShortcutTable, config: EngineConfig, rng: np.random.Generator,
                   stats: dict | None = None) -> ShortcutTable:
    """Shortcuts for long monotone paths, built from sampled arc-bounded paths."""
    n = table.n
    store = compute_funnels(table, config, rng, stats)
    V = np.arange(n)
    T: set[int] = set()
    for i in range(1, config.levels(n) + 1):
        Ti = _sample(rng, n, config.p_level(n, i))
        if len(Ti):

            def step(Ti=Ti):
                a = concatenate_opposite(store, Ti, V, V)
                b = concatenate(store, Ti, V, V)
                return a or b

            _repeat(step, 2**i, stats, "level-round")
        T.update(int(t) for t in Ti)
    arc_bounded_to_monotone(store, sorted(T))
    _observe(config, "long", store)
    return _table_from_mono(store)


def _table_max(a: ShortcutTable, b: ShortcutTable) -> ShortcutTable:
    """Entrywise maximum; ties keep ``a``."""
    better = b.M > a.M
    M = np.where(better, b.M, a.M)
    W = None
    if a.witnesses is not None:
        W = a.witnesses.copy()
        W[better] = b.witnesses[better]
    return ShortcutTable(M, a.B, W, max(a.generation, b.generation) + 1)


@dataclass
class _Cache:
    """Results of deterministic calls keyed by the exact table contents."""

    short_key: bytes | None = None
    short_value: ShortcutTable | None = None
    long_key: bytes | None = None
    long_value: ShortcutTable | None = None


def update_shortcuts(table: ShortcutTable, config: EngineConfig, rng: np.random.Generator,
                     stats: dict | None = None, cache: _Cache | None = None) -> ShortcutTable:
    """One outer iteration: ``r`` short passes with occasional long passes."""
    n = table.n
    cache = cache if cache is not None else _Cache()
    M_prime = table
    gate = config.gate(n)
    deterministic_long = config.exhaustive
    for _ in range(config.r(n)):
        if gate >= 1.0 or rng.random() < gate:
            key = table.M.tobytes()
            if deterministic_long and cache.long_key == key:
                longer = cache.long_value
            else:
                _count(stats, "long")
                longer = long_shortcuts(table, config, rng, stats)
                if deterministic_long:
                    cache.long_key, cache.long_value = key, longer
            M_prime = _table_max(M_prime, longer)
        key = table.M.tobytes()
        if cache.short_key == key:
            table = cache.short_value
        else:
            _count(stats, "short")
            new = short_shortcuts(table, config)
            if config.debug_checks:
                _check_monotone(table, new)
            if np.array_equal(new.M, table.M):
                new = table
            cache.short_key, cache.short_value = key, new
            table = new
    out = _table_max(table, M_prime)
    if config.debug_checks:
        _check_monotone(table, out)
    return out


def _check_monotone(old: ShortcutTable, new: ShortcutTable) -> None:
    if np.any(new.M < old.M):
        raise AssertionError("a shortcut entry decreased")
    if np.any(np.diagonal(new.M) != 0):
        raise AssertionError("the shortcut diagonal moved away from zero")


@dataclass
class ShortcutRun:
    table: ShortcutTable
    stats: dict
    outer_done: int


def compute_shortcuts(graph: EnergyGraph, config: EngineConfig | None = None,
                      rng: np.random.Generator | None = None) -> ShortcutRun:
    """Run all outer iterations on the normalized ``graph``."""
    config = config or EngineConfig()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    graph = normalize(graph)
    table = ShortcutTable.initial(graph, witnesses=config.witnesses)
    n = graph.n
    stats: dict = {}
    cache = _Cache()
    done = 0
    for _ in range(config.outer(n)):
        new = update_shortcuts(table, config, rng, stats, cache)
        done += 1
        fixed = np.array_equal(new.M, table.M)
        table = new if not fixed else table
        if fixed and config.exhaustive:
            # exhaustive passes are deterministic: an unchanged table stays unchanged
            break
    return ShortcutRun(table, stats, done)


def unwrap_witness(source, key: tuple, cap: int = 1_000_000):
    """Concrete path in ``G`` and its drop schedule for one table entry.

    ``source`` is a :class:`ShortcutTable` (``key = (x, y)``) or a
    :class:`BoundedPathStore` with ``key = ("mono", x, y)``,
    ``("first", x, y, z)`` or ``("last", x, y, z)``.
    """
    if isinstance(source, ShortcutTable):
        if source.witnesses is None:
            raise ValueError("witness recording was disabled for this table")
        item = source.witnesses[key]
    else:
        if not source.has_witnesses:
            raise ValueError("witness recording was disabled for this store")
        kind, *idx = key
        item = {"mono": source.mono_w, "first": source.first_w, "last": source.last_w}[kind][
            tuple(idx)
        ]
    if item is None:
        raise KeyError(f"no witness recorded for {key!r}")
    return unwrap(item, cap)
