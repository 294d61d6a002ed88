"""
Why short shortcuts alone are slow
==================================

A double-funnel path alternates signs with magnitudes that first rise and
then fall.  The only monotone piece of two or three arcs sits at the very
end, so each pass of the short-shortcut step can only fold the tail by one
arc pair.  We count those passes and compare with the full pipeline.
"""

import time

import numpy as np

from evroute.generators import double_funnel_gains, gen_double_funnel, short_monotone_subpaths
from evroute.oracle import oracle_alpha_all_pairs
from evroute.stage1 import EngineConfig, ShortcutTable, short_shortcuts
from evroute.stage2 import solve_alpha

k = 12
B = 2 * (k - 3)
gains = double_funnel_gains(k, B)
print("gains:", gains)
print("short monotone subpaths:", short_monotone_subpaths(gains, B))


def short_only_passes(k, B):
    graph = gen_double_funnel(k, B)
    total = sum(double_funnel_gains(k, B))
    table = ShortcutTable.initial(graph)
    passes = 0
    while table.M[0, k - 1] < total:
        table = short_shortcuts(table)
        passes += 1
    return passes


# The pass count grows linearly with the path length, about k / 2.
for k in (8, 16, 24, 32, 40):
    print(f"k={k:3d}  short-only passes: {short_only_passes(k, 2 * (k - 3)):3d}")

# Long shortcuts and funnels do not have this problem.
k = 24
graph = gen_double_funnel(k, 2 * (k - 3))
start = time.perf_counter()
alpha = solve_alpha(graph, EngineConfig(exhaustive=True)).alpha
print(f"full pipeline on k={k}: exact={np.array_equal(alpha, oracle_alpha_all_pairs(graph))}, "
      f"{time.perf_counter() - start:.1f}s")
