"""
Charge tables on two tiny paths
===============================

Two disjoint paths with battery capacity 10: ``v1 -> v2 -> v3`` with gains
-5 and +5, and ``u1 -> u2 -> u3`` with gains +5 and -5.  The same arcs in a
different order behave very differently depending on the start charge.
"""

import numpy as np

from evroute.generators import two_path_demo
from evroute.oracle import oracle_alpha_all_pairs, oracle_min_initial
from evroute.stage1 import EngineConfig, unwrap_witness
from evroute.stage2 import min_initial_charge, solve_alpha

names = ["v1", "v2", "v3", "u1", "u2", "u3"]
graph = two_path_demo(10)

# With an empty battery the v-path is blocked at once, while the u-path
# charges first and arrives with nothing left.
alpha_0 = oracle_alpha_all_pairs(graph, 0)
print("alpha_0(v1, v3) =", alpha_0[0, 2])
print("alpha_0(u1, u3) =", alpha_0[3, 5])

# From a full battery the v-path dips to 5 and refills to the cap, and the
# u-path cannot store the +5 (the battery is already full), so it ends at 5.
result = solve_alpha(graph, EngineConfig(seed=0, witnesses=True))
print("alpha_10(v1, v3) =", result.alpha[0, 2])
print("alpha_10(u1, u3) =", result.alpha[3, 5])
print("solver equals brute force:", np.array_equal(result.alpha, oracle_alpha_all_pairs(graph)))

# The minimum start charge is the mirror image, computed on the reversed graph.
beta = min_initial_charge(graph)
print("beta_0(v1, v3) =", beta[0, 2], "  beta_0(u1, u3) =", beta[3, 5])
print("beta equals brute force:", np.array_equal(beta, oracle_min_initial(graph)))

# Every shortcut carries a witness that unwraps into a real path and a
# charge-drop schedule.  The u-path shortcut of gain -5 drops the surplus
# charge at u2, where a full battery cannot take the +5.
path, drops = unwrap_witness(result.table, (3, 5))
print("M[u1][u3] =", result.table.M[3, 5], "via", [names[v] for v in path], "drops", drops)
