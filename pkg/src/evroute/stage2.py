"""Stage II: the charge-state graph ``H``, its closure, and the final tables.

Node ``v`` of ``H`` stands for "at ``v`` with charge 0" and node ``n + v``
for "at ``v`` with full charge ``B``".  An arc ``a -> b`` claims that from
state ``a`` the car can reach state ``b`` (at least that much charge).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .graph import NEG_INF, POS_INF, EnergyGraph, normalize
from .stage1 import (
    CHUNK_ELEMENTS,
    EngineConfig,
    ShortcutRun,
    ShortcutTable,
    compute_funnels,
    compute_shortcuts,
)

ZERO, FULL = 0, 1
RULES = ("0-0", "0-B", "B-0", "B-B")


@dataclass
class ChargeStateGraph:
    """Boolean adjacency over the ``2n`` charge states."""

    n: int
    adj: np.ndarray
    tags: Optional[dict] = field(default=None, repr=False)

    def node(self, v: int, level: int) -> int:
        return v + (self.n if level == FULL else 0)

    def has(self, u: int, lu: int, v: int, lv: int) -> bool:
        return bool(self.adj[self.node(u, lu), self.node(v, lv)])

    def block(self, lu: int, lv: int) -> np.ndarray:
        """The ``n x n`` sub-matrix of arcs from level ``lu`` to level ``lv``."""
        n = self.n
        return self.adj[lu * n : (lu + 1) * n, lv * n : (lv + 1) * n]


def _exists_two_step(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``[x, z]``: is there ``y`` with ``P[x, y] + Q[y, z] >= 0``."""
    n = P.shape[0]
    out = np.zeros((n, n), dtype=bool)
    step = max(1, CHUNK_ELEMENTS // max(1, n * n))
    for s in range(0, n, step):
        out[s : s + step] = (P[s : s + step, :, None] + Q[None, :, :]).max(axis=1) >= 0
    return out


def build_H(M: np.ndarray, B: int, tags: bool = False) -> ChargeStateGraph:
    """Apply the four arc rules over all triples of ``M``."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    nonneg = np.where(M >= 0, M, NEG_INF)
    with np.errstate(invalid="ignore"):
        zz = _exists_two_step(nonneg, M)  # M[x][y] >= 0 and M[x][y] + M[y][z] >= 0
        zf = (M >= B) | ((M + M.T > 0) & (M > 0))
        fz = np.isfinite(M)
        ff = _exists_two_step(M, nonneg)  # M[y][z] >= 0 and M[x][y] + M[y][z] >= 0
    adj = np.zeros((2 * n, 2 * n), dtype=bool)
    adj[:n, :n] = zz
    adj[:n, n:] = zf
    adj[n:, :n] = fz
    adj[n:, n:] = ff
    tag_map = None
    if tags:
        tag_map = {}
        for rule, (lu, lv), blk in zip(RULES, ((0, 0), (0, 1), (1, 0), (1, 1)), (zz, zf, fz, ff)):
            for x, y in zip(*np.nonzero(blk)):
                tag_map[(int(x) + lu * n, int(y) + lv * n)] = rule
    return ChargeStateGraph(n, adj, tag_map)


def transitive_closure(H: ChargeStateGraph) -> ChargeStateGraph:
    """Pairs joined by a walk of one or more arcs.

    A node is related to itself only if it lies on a cycle, which includes
    every node with a self-arc.
    """
    A = csr_matrix(H.adj.astype(np.int8))
    dist = shortest_path(A, method="D", directed=True, unweighted=True)
    reach = np.isfinite(dist)  # walks of length zero or more
    closed = (H.adj.astype(np.int32) @ reach.astype(np.int32)) > 0
    return ChargeStateGraph(H.n, closed)


@dataclass
class AlphaResult:
    alpha: np.ndarray
    table: ShortcutTable
    closure: ChargeStateGraph
    stats: dict


def mfc(M: np.ndarray | ShortcutTable, B: int | None = None, config: EngineConfig | None = None,
        rng: np.random.Generator | None = None,
        closure: ChargeStateGraph | None = None) -> np.ndarray:
    """``alpha_B`` for every pair from a finished shortcut table."""
    config = config or EngineConfig()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    table = M if isinstance(M, ShortcutTable) else ShortcutTable(np.asarray(M, float), int(B))
    B = table.B
    n = table.n
    if closure is None:
        closure = transitive_closure(build_H(table.M, B))
    full = closure.block(FULL, FULL)
    store = compute_funnels(table, config, rng)
    # A_B[y][t] = max over x with M[y][x] <= 0 of B + D[yx][t]
    down = (table.M <= 0)[:, :, None]
    A = np.where(down, B + store.first, NEG_INF).max(axis=1)
    alpha = np.full((n, n), NEG_INF)
    step = max(1, CHUNK_ELEMENTS // max(1, n * n))
    for s in range(0, n, step):
        alpha[s : s + step] = np.where(full[s : s + step, :, None], A[None], NEG_INF).max(axis=1)
    alpha[full] = B
    np.fill_diagonal(alpha, B)
    return alpha


def solve_alpha(graph: EnergyGraph, config: EngineConfig | None = None) -> AlphaResult:
    """Both stages on ``graph``: the all-pairs maximum final charge from a full battery."""
    config = config or EngineConfig()
    rng = np.random.default_rng(config.seed)
    run: ShortcutRun = compute_shortcuts(normalize(graph), config, rng)
    closure = transitive_closure(build_H(run.table.M, run.table.B))
    alpha = mfc(run.table, config=config, rng=rng, closure=closure)
    return AlphaResult(alpha, run.table, closure, dict(run.stats, outer=run.outer_done))


def min_initial_charge(graph: EnergyGraph, config: EngineConfig | None = None) -> np.ndarray:
    """``beta_0`` for every pair, from the maximum final charge on the reversed graph."""
    rev = solve_alpha(normalize(graph).reversed(), config).alpha
    return beta_from_reversed(rev, graph.B)


def beta_from_reversed(rev_alpha: np.ndarray, B: int) -> np.ndarray:
    """``beta_0[s][t] = B - alpha_rev[t][s]``, with ``+inf`` where unreachable."""
    beta = np.where(np.isfinite(rev_alpha.T), B - rev_alpha.T, POS_INF)
    np.fill_diagonal(beta, 0.0)
    return beta
