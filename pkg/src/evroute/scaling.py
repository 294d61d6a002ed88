"""Wall-time measurements of the full solver on dense random instances."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .graph import EnergyGraph
from .generators import GenSpec, gen_random
from .stage1 import EngineConfig
from .stage2 import solve_alpha

# One outer iteration with one forced long pass and light sampling.  The
# default schedule runs O(log^2 n) outer iterations of O(sqrt n) passes each,
# which is far too slow in numpy at n = 256; this keeps every kernel in play.
BENCH_CONFIG = EngineConfig(outer_iterations=1, inner_iterations=1, long_gate=1.0,
                            c_S=0.1, c_T=0.02)


@dataclass(frozen=True)
class Timing:
    n: int
    seconds: float


def dense_instance(n: int, seed: int, B: int = 20) -> EnergyGraph:
    return gen_random(GenSpec(n=n, density=1.0, gain_bound=B, B=B, seed=seed))


def time_solver(sizes, seed: int = 0, config: EngineConfig = BENCH_CONFIG,
                B: int = 20) -> list[Timing]:
    out = []
    for n in sizes:
        graph = dense_instance(n, seed + n, B)
        start = time.perf_counter()
        solve_alpha(graph, config)
        out.append(Timing(n, time.perf_counter() - start))
    return out


def growth_exponent(timings: list[Timing]) -> float:
    """Least-squares slope of ``log t`` against ``log n``."""
    if len(timings) < 2:
        return math.nan
    x = np.log([t.n for t in timings])
    y = np.log([max(t.seconds, 1e-9) for t in timings])
    return float(np.polyfit(x, y, 1)[0])
