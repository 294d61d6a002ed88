"""Provenance records for shortcut and bounded-path table entries.

Every finite entry of the shortcut table ``M`` carries an *arc witness*: an
original arc of ``G``, the zero self-arc of the diagonal, or a shortcut
standing for the monotone path recorded by an earlier derivation.  Entries of
the bounded-path tables carry a *derivation*, which expands to a path of arc
witnesses (a path in ``G^M``) plus a charge-drop schedule.  Unwrapping
replaces every shortcut arc by its own path, recursively, until only arcs of
``G`` remain; the drop placed at the head of a shortcut arc moves to the last
vertex of its expansion.

Derivations are immutable and only ever point at older objects, so the
reference structure is acyclic.
"""

from __future__ import annotations

from typing import Sequence, Union


class WitnessError(RuntimeError):
    """A derivation could not be expanded into a well-formed path."""


class WitnessTooLongError(WitnessError):
    """Unwrapping exceeded the configured length cap."""


class GraphArc:
    """An arc of the input graph."""

    __slots__ = ("src", "dst", "gain")

    def __init__(self, src: int, dst: int, gain: int):
        self.src, self.dst, self.gain = src, dst, gain

    def __repr__(self) -> str:
        return f"GraphArc({self.src}->{self.dst}, {self.gain})"


class Stay:
    """The zero-gain diagonal entry ``M[v][v] = 0``; unwraps to the one-vertex path."""

    __slots__ = ("src", "dst", "gain")

    def __init__(self, v: int):
        self.src = self.dst = v
        self.gain = 0

    def __repr__(self) -> str:
        return f"Stay({self.src})"


class Shortcut:
    """A shortcut arc backed by a monotone derivation over an older table."""

    __slots__ = ("src", "dst", "gain", "node")

    def __init__(self, node: "Derivation"):
        self.node = node
        self.src, self.dst, self.gain = node.src, node.dst, node.value

    def __repr__(self) -> str:
        return f"Shortcut({self.src}->{self.dst}, {self.gain}, {self.node.rule})"


ArcWitness = Union[GraphArc, Stay, Shortcut]


class Derivation:
    """Base class; subclasses implement :meth:`_expand`."""

    __slots__ = ("rule", "value", "src", "dst", "_cache")

    def __init__(self, rule: str, value: int, src: int, dst: int):
        self.rule, self.value, self.src, self.dst = rule, int(value), src, dst
        self._cache = None

    def expand(self) -> tuple[list[ArcWitness], list[int]]:
        """Path in ``G^M`` as arc witnesses plus per-vertex drops (copies)."""
        if self._cache is None:
            self._cache = self._expand()
        arcs, drops = self._cache
        return list(arcs), list(drops)

    def _expand(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.rule}: {self.src}->{self.dst} = {self.value})"


def _as_path(part) -> tuple[list[ArcWitness], list[int]]:
    if isinstance(part, Derivation):
        return part.expand()
    return [part], [0, 0]


class Single(Derivation):
    """The one-arc path made of an arc witness."""

    __slots__ = ("arc",)

    def __init__(self, arc: ArcWitness, rule: str = "init"):
        super().__init__(rule, arc.gain, arc.src, arc.dst)
        self.arc = arc

    def _expand(self):
        return [self.arc], [0, 0]


class Flat(Derivation):
    """An explicit short path with an explicit schedule."""

    __slots__ = ("arcs", "drops")

    def __init__(self, rule: str, value: int, arcs: Sequence[ArcWitness], drops: Sequence[int]):
        super().__init__(rule, value, arcs[0].src, arcs[-1].dst)
        if len(drops) != len(arcs) + 1:
            raise WitnessError("flat witness needs one drop per vertex")
        self.arcs, self.drops = tuple(arcs), tuple(int(d) for d in drops)

    def _expand(self):
        return list(self.arcs), list(self.drops)


class Join(Derivation):
    """Concatenation ``left | right`` with an optional extra drop at the junction."""

    __slots__ = ("left", "right", "junction_drop")

    def __init__(self, rule: str, value: int, left, right, junction_drop: int = 0):
        super().__init__(rule, value, left.src, right.dst)
        if left.dst != right.src:
            raise WitnessError(f"cannot join {left!r} and {right!r}")
        self.left, self.right, self.junction_drop = left, right, int(junction_drop)

    def _expand(self):
        la, ld = _as_path(self.left)
        ra, rd = _as_path(self.right)
        drops = ld[:-1] + [ld[-1] + rd[0] + self.junction_drop] + rd[1:]
        return la + ra, drops


class Trim(Derivation):
    """Remove the first (``head=True``) or the last arc of a derivation."""

    __slots__ = ("inner", "head")

    def __init__(self, rule: str, value: int, inner: Derivation, head: bool):
        arcs, _ = inner.expand()
        if len(arcs) < 2:
            raise WitnessError("cannot trim a path with fewer than two arcs")
        if head:
            super().__init__(rule, value, arcs[1].src, inner.dst)
        else:
            super().__init__(rule, value, inner.src, arcs[-1].src)
        self.inner, self.head = inner, head

    def _expand(self):
        arcs, drops = self.inner.expand()
        if self.head:
            if drops[1] != 0:
                raise WitnessError("trimmed head leaves a drop on the new first vertex")
            return arcs[1:], [0] + drops[2:]
        return arcs[:-1], drops[:-1]


class DropAtEnd(Derivation):
    """Add ``amount`` to the drop at the last vertex."""

    __slots__ = ("inner", "amount")

    def __init__(self, rule: str, value: int, inner: Derivation, amount: int):
        super().__init__(rule, value, inner.src, inner.dst)
        self.inner, self.amount = inner, int(amount)

    def _expand(self):
        arcs, drops = self.inner.expand()
        drops[-1] += self.amount
        return arcs, drops


class Clamp(Derivation):
    """Add the least drops that keep every scheduled gain at or below ``ceiling``."""

    __slots__ = ("inner", "ceiling")

    def __init__(self, rule: str, value: int, inner: Derivation, ceiling: int = 0):
        super().__init__(rule, value, inner.src, inner.dst)
        self.inner, self.ceiling = inner, int(ceiling)

    def _expand(self):
        arcs, drops = self.inner.expand()
        g = 0
        for i, arc in enumerate(arcs, start=1):
            g += arc.gain - drops[i]
            if g > self.ceiling:
                drops[i] += g - self.ceiling
                g = self.ceiling
        return arcs, drops


def arc_witness_of(node: Derivation) -> ArcWitness:
    """The arc witness for a shortcut-table entry derived by ``node``."""
    if isinstance(node, Single):
        return node.arc
    return Shortcut(node)


def flatten(item, cap: int = 1_000_000,
            memo: dict | None = None) -> tuple[list[int], list[int], list[int]]:
    """Expand an arc witness or derivation down to a path in ``G``.

    Returns ``(vertices, drops, arc_gains)``.  Raises
    :class:`WitnessTooLongError` when the path would exceed ``cap`` arcs.
    ``memo`` maps ``id(node)`` to expansions and may be shared between calls
    as long as the nodes it has seen stay alive.
    """
    memo = {} if memo is None else memo

    def arc_path(arc):
        if isinstance(arc, GraphArc):
            return [arc.src, arc.dst], [0, 0], [arc.gain]
        if isinstance(arc, Stay):
            return [arc.src], [0], []
        return node_path(arc.node)

    def node_path(node: Derivation):
        key = id(node)
        if key in memo:
            return memo[key]
        arcs, drops = node.expand()
        verts = [node.src]
        out_drops = [0]
        gains: list[int] = []
        for arc, d in zip(arcs, drops[1:]):
            p, pd, pg = arc_path(arc)
            if p[0] != verts[-1]:
                raise WitnessError(f"arc {arc!r} does not start at {verts[-1]}")
            verts.extend(p[1:])
            out_drops.extend(pd[1:])
            gains.extend(pg)
            if len(verts) - 1 > cap:
                raise WitnessTooLongError(f"witness longer than {cap} arcs")
            if d:
                if len(out_drops) == 1:
                    raise WitnessError("a positive drop landed on the first vertex")
                out_drops[-1] += d
        if verts[-1] != node.dst:
            raise WitnessError(f"derivation {node!r} ends at {verts[-1]}")
        memo[key] = (verts, out_drops, gains)
        return memo[key]

    if isinstance(item, Derivation):
        verts, drops, gains = node_path(item)
    else:
        verts, drops, gains = arc_path(item)
    return list(verts), list(drops), list(gains)


def unwrap(item, cap: int = 1_000_000, memo: dict | None = None) -> tuple[list[int], list[int]]:
    """Path in ``G`` and its drop schedule, as ``(vertices, drops)``."""
    verts, drops, _ = flatten(item, cap, memo)
    return verts, drops


def split_position(node: Derivation, first: bool, cap: int = 1_000_000) -> int:
    """Position in the unwrapped path where the bounding shortcut arc ends/starts.

    For a first-arc-bounded derivation this is the index of ``v_2``'s image;
    for a last-arc-bounded one, the index of ``v_{k-1}``'s image.
    """
    arcs, _ = node.expand()
    if first:
        verts, _ = unwrap(arcs[0], cap)
        return len(verts) - 1
    verts, _ = unwrap(arcs[-1], cap)
    total, _ = unwrap(node, cap)
    return len(total) - len(verts)
