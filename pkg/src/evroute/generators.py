"""Seeded instance generators: random graphs and structured adversarial paths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import NEG_INF, EnergyGraph, InvalidCapacityError, path_graph
from .paths import Monotonicity, classify_monotone, is_funnel, zigzag_funnel

KINDS = ("random", "funnel", "double_funnel", "two_path_demo")


class GeneratorError(ValueError):
    """A generator was asked for an instance it cannot produce."""


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one generated instance.

    ``n`` is the vertex count for ``random`` and the path length in vertices
    for ``double_funnel``.  ``gains`` is only used by ``funnel``.  The gain
    bound defaults to ``B``.
    """

    kind: str = "random"
    n: int = 8
    density: float = 0.5
    gain_bound: Optional[int] = None
    B: int = 12
    seed: int = 0
    gains: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise GeneratorError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.density <= 1.0:
            raise GeneratorError(f"density must lie in [0, 1], got {self.density}")
        if self.B <= 0:
            raise InvalidCapacityError(f"capacity must be positive, got {self.B}")
        if self.gain_bound is None:
            object.__setattr__(self, "gain_bound", self.B)
        if self.gain_bound < 0 or self.gain_bound > self.B:
            raise GeneratorError(f"gain bound must lie in [0, B], got {self.gain_bound}")
        if self.n < 1:
            raise GeneratorError(f"n must be positive, got {self.n}")


def gen_random(spec: GenSpec) -> EnergyGraph:
    """Each ordered pair ``u != v`` gets an arc with probability ``density``.

    Gains are uniform integers in ``[-gain_bound, gain_bound]``.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    present = rng.random((n, n)) < spec.density
    gains = rng.integers(-spec.gain_bound, spec.gain_bound + 1, size=(n, n))
    g = np.where(present, gains.astype(np.float64), NEG_INF)
    np.fill_diagonal(g, NEG_INF)
    return EnergyGraph(g, spec.B)


def gen_funnel_path(gains: Sequence[int], B: int | None = None) -> EnergyGraph:
    """The path graph with the given arc gains, which must form a funnel."""
    gains = [int(g) for g in gains]
    if not zigzag_funnel(gains):
        raise GeneratorError(f"gains {gains} do not form a funnel")
    B = B if B is not None else max(abs(g) for g in gains)
    graph = path_graph(gains, B)
    if not is_funnel(graph, list(range(len(gains) + 1))):
        raise GeneratorError(f"gains {gains} do not form a funnel with capacity {B}")
    return graph


def short_monotone_subpaths(gains: Sequence[int], B: int) -> list[tuple[int, int]]:
    """Positions ``(i, j)`` of every monotone subpath with two or three arcs.

    Monotone is meant with respect to the zero schedule; vertex positions are
    0-based, so the subpath spans vertices ``i..j``.
    """
    graph = path_graph(gains, B)
    out = []
    for length in (2, 3):
        for i in range(len(gains) - length + 1):
            sub = list(range(i, i + length + 1))
            if classify_monotone(graph, sub) is not Monotonicity.NOT_MONOTONE:
                out.append((i, i + length))
    return out


def double_funnel_gains(k: int, B: int) -> list[int]:
    """Arc gains of the adversarial path on ``k`` vertices.

    The first ``k - 2`` arcs follow the ramp ``+p, -p, +(p-1), -(p-2), ..., -1``
    with ``p = k - 3``, scaled by ``B // p``: a two-arc rising funnel glued to
    a long falling one.  The final arc ``+p`` (scaled) makes the last three
    arcs ascending and the whole path ascending.
    """
    if k < 6:
        raise GeneratorError(f"need at least 6 vertices, got {k}")
    if k % 2:
        # Signs alternate along the prefix, so an odd k ends it with the sign
        # it started with and the tail cannot be monotone.
        raise GeneratorError(f"the vertex count must be even, got {k}")
    p = k - 3
    scale = B // p
    if scale < 1:
        raise InvalidCapacityError(f"capacity {B} is below the ramp peak {p}")
    mags = [p, p] + [p - i for i in range(1, k - 3)]
    prefix = [m if i % 2 == 0 else -m for i, m in enumerate(mags)]
    return [g * scale for g in prefix] + [p * scale]


def gen_double_funnel(k: int, B: int) -> EnergyGraph:
    """A path ``v_1 ... v_k`` whose prefix ``v_1 ... v_{k-1}`` is a double-funnel.

    The only monotone subpath with two or three arcs is the tail
    ``v_{k-3} ... v_k``; this is checked by exhaustive scan before returning.
    """
    gains = double_funnel_gains(k, B)
    scan = short_monotone_subpaths(gains, B)
    if scan != [(k - 4, k - 1)]:
        raise GeneratorError(f"short monotone subpaths {scan}, expected only the tail")
    graph = path_graph(gains, B)
    prefix = list(range(k - 1))
    if not (is_funnel(graph, prefix[:3]) and is_funnel(graph, prefix[1:])):
        raise GeneratorError("the prefix does not split into two funnels")
    return graph


def two_path_demo(B: int = 10) -> EnergyGraph:
    """Two disjoint 2-arc paths: ``v1 v2 v3`` with gains ``(-5, +5)`` and
    ``u1 u2 u3`` with ``(+5, -5)``.

    Vertices 0, 1, 2 are ``v1, v2, v3`` and 3, 4, 5 are ``u1, u2, u3``.
    """
    g = np.full((6, 6), NEG_INF)
    g[0, 1], g[1, 2] = -5, 5
    g[3, 4], g[4, 5] = 5, -5
    return EnergyGraph(g, B)


def generate(spec: GenSpec) -> EnergyGraph:
    """Dispatch on ``spec.kind``."""
    if spec.kind == "random":
        return gen_random(spec)
    if spec.kind == "funnel":
        return gen_funnel_path(spec.gains, spec.B)
    if spec.kind == "double_funnel":
        return gen_double_funnel(spec.n, spec.B)
    return two_path_demo(spec.B)
