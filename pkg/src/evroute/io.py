"""Text formats for instances and result tables.

Instance files::

    c any comment
    p ev <n> <m> <B>
    a <u> <v> <g>        (m lines, 1-based vertices, integer gain)

Result files hold one tab-separated ``s t value`` line per ordered pair,
1-based and sorted by ``(s, t)``.  Infinite values are written ``-inf`` or
``+inf``.
"""

from __future__ import annotations

import os
from typing import TextIO

import numpy as np

from .graph import NEG_INF, EnergyGraph, EnergyGraphError, from_arcs, normalize

# Gains are kept in float64; beyond this they stop being exact integers.
MAX_ABS_GAIN = 2**50


class InstanceFormatError(ValueError):
    """A malformed instance file; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _int_field(token: str, line: int, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise InstanceFormatError(line, f"{what} {token!r} is not an integer") from None
    if abs(value) > MAX_ABS_GAIN:
        raise InstanceFormatError(line, f"{what} {value} is out of the representable range")
    return value


def parse_graph(lines) -> EnergyGraph:
    """Parse instance text; parallel arcs keep the larger gain.  Not normalized."""
    header = None
    arcs = []
    no = 0
    for no, raw in enumerate(lines, start=1):
        tokens = raw.split()
        if not tokens or tokens[0] == "c":
            continue
        if header is None:
            if len(tokens) != 5 or tokens[0] != "p" or tokens[1] != "ev":
                raise InstanceFormatError(no, "expected header 'p ev <n> <m> <B>'")
            n, m, B = (_int_field(t, no, name) for t, name in zip(tokens[2:], ("n", "m", "B")))
            if n < 1 or m < 0:
                raise InstanceFormatError(no, "n must be positive and m nonnegative")
            if B <= 0:
                raise InstanceFormatError(no, f"capacity must be positive, got {B}")
            header = (n, m, B)
            continue
        if tokens[0] != "a" or len(tokens) != 4:
            raise InstanceFormatError(no, "expected arc line 'a <u> <v> <g>'")
        u, v = (_int_field(t, no, "vertex") for t in tokens[1:3])
        g = _int_field(tokens[3], no, "gain")
        if not (1 <= u <= header[0] and 1 <= v <= header[0]):
            raise InstanceFormatError(no, f"vertex out of range 1..{header[0]}")
        arcs.append((u - 1, v - 1, g))
    if header is None:
        raise InstanceFormatError(1, "missing header 'p ev <n> <m> <B>'")
    n, m, B = header
    if len(arcs) != m:
        raise InstanceFormatError(no, f"header announces {m} arcs, found {len(arcs)}")
    return from_arcs(n, arcs, B)


def load_graph(path: str | os.PathLike) -> EnergyGraph:
    """Read and normalize an instance file."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return normalize(parse_graph(lines))


def format_graph(graph: EnergyGraph, comment: str | None = None) -> str:
    out = []
    if comment:
        out.extend(f"c {line}" for line in comment.splitlines())
    arcs = graph.arcs()
    out.append(f"p ev {graph.n} {len(arcs)} {graph.B}")
    out.extend(f"a {u + 1} {v + 1} {g}" for u, v, g in arcs)
    return "\n".join(out) + "\n"


def save_graph(graph: EnergyGraph, path: str | os.PathLike, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(graph, comment))


def format_value(x: float) -> str:
    if x == NEG_INF:
        return "-inf"
    if x == float("inf"):
        return "+inf"
    return str(int(x))


def write_table(table: np.ndarray, fh: TextIO) -> None:
    table = np.asarray(table)
    n = table.shape[0]
    for s in range(n):
        fh.write("".join(f"{s + 1}\t{t + 1}\t{format_value(table[s, t])}\n" for t in range(n)))


def save_table(table: np.ndarray, path: str | os.PathLike) -> None:
    """Write an ``n x n`` charge table as ``n**2`` sorted triples."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_table(table, fh)


def load_table(path: str | os.PathLike) -> np.ndarray:
    """Read a table written by :func:`save_table`."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise InstanceFormatError(no, "expected 's t value'")
            entries.append((int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])))
    n = int(round(len(entries) ** 0.5))
    if n * n != len(entries):
        raise EnergyGraphError(f"{len(entries)} lines do not form a square table")
    table = np.empty((n, n))
    for s, t, value in entries:
        table[s, t] = value
    return table
