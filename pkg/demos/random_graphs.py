"""
Sampling against brute force on random graphs
=============================================

The solver samples vertex sets, so a single run may miss a shortcut.  Misses
only ever make the answer smaller: the table is never above the true
maximum final charge.  Here we run a few seeds on random graphs and compare
with the product-graph oracle, then look at which pairs the charge-state
closure says can be travelled from full battery to full battery.
"""

import numpy as np

from evroute.generators import GenSpec, gen_random
from evroute.io import format_value
from evroute.oracle import compare_tables, oracle_alpha_all_pairs
from evroute.stage1 import EngineConfig
from evroute.stage2 import FULL, solve_alpha

exact = sound = runs = 0
for i in range(20):
    graph = gen_random(GenSpec(n=8, density=0.5, B=12, seed=i))
    truth = oracle_alpha_all_pairs(graph)
    for seed in range(3):
        cmp = compare_tables(solve_alpha(graph, EngineConfig(seed=seed)).alpha, truth)
        exact += cmp.exact
        sound += cmp.sound
        runs += 1
print(f"{runs} runs: {sound} never above the oracle, {exact} exactly equal")

# Full-to-full pairs of the closure are the pairs that keep a full battery.
graph = gen_random(GenSpec(n=8, density=0.2, B=12, seed=3))
res = solve_alpha(graph, EngineConfig(exhaustive=True))
full = res.closure.block(FULL, FULL)
truth = oracle_alpha_all_pairs(graph) == graph.B
print("full-to-full pairs:", int(full.sum()), " oracle pairs with alpha = B:", int(truth.sum()))
print("same set:", np.array_equal(full, truth))
for row in res.alpha:
    print(" ".join(f"{format_value(x):>4}" for x in row))
