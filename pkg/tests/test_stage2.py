import numpy as np
from hypothesis import given

from evroute.generators import two_path_demo
from evroute.graph import NEG_INF, POS_INF, EnergyGraph, normalize
from evroute.oracle import oracle_alpha_all_pairs, oracle_min_initial
from evroute.stage1 import EngineConfig
from evroute.stage2 import (
    FULL,
    ZERO,
    ChargeStateGraph,
    build_H,
    min_initial_charge,
    mfc,
    solve_alpha,
    transitive_closure,
)

from conftest import small_graphs

EXHAUSTIVE = EngineConfig(exhaustive=True)
V1, V2, V3, U1, U2, U3 = range(6)


def shortcut_matrix(n, arcs):
    M = np.full((n, n), NEG_INF)
    np.fill_diagonal(M, 0)
    for u, v, g in arcs:
        M[u, v] = g
    return M


# -- build_H -----------------------------------------------------------------


def test_finite_entry_gives_full_to_empty_arc():
    H = build_H(shortcut_matrix(2, [(0, 1, -7)]), 10)
    assert H.has(0, FULL, 1, ZERO)
    assert not H.has(0, ZERO, 1, FULL)


def test_entry_of_at_least_B_lifts_empty_to_full():
    H = build_H(shortcut_matrix(2, [(0, 1, 12)]), 10)
    assert H.has(0, ZERO, 1, FULL)


def test_full_to_full_through_a_rising_arc():
    H = build_H(shortcut_matrix(3, [(0, 1, -3), (1, 2, 4)]), 10)
    assert H.has(0, FULL, 2, FULL)
    assert not H.has(0, ZERO, 2, ZERO)


def test_reflexive_arcs_come_from_the_zero_diagonal():
    H = build_H(shortcut_matrix(3, []), 10)
    for v in range(3):
        assert H.has(v, ZERO, v, ZERO) and H.has(v, FULL, v, FULL)


def test_tags_name_the_rule():
    H = build_H(shortcut_matrix(2, [(0, 1, -7)]), 10, tags=True)
    assert H.tags[(H.node(0, FULL), H.node(1, ZERO))] == "B-0"


# -- transitive closure ---------------------------------------------------------


def adjacency(n, arcs):
    adj = np.zeros((n, n), dtype=bool)
    for a, b in arcs:
        adj[a, b] = True
    return ChargeStateGraph(n // 2, adj)


def test_closure_of_a_chain():
    closed = transitive_closure(adjacency(4, [(0, 1), (1, 2)])).adj
    assert closed[0, 2] and closed[0, 1] and closed[1, 2]
    assert not closed[2, 0]
    assert not closed[0, 0]


def test_closure_of_empty_graph():
    assert not transitive_closure(adjacency(4, [])).adj.any()


def test_closure_of_a_cycle():
    closed = transitive_closure(adjacency(2, [(0, 1), (1, 0)])).adj
    assert closed.all()


def test_closure_matches_floyd_warshall(rng):
    for _ in range(20):
        adj = rng.random((8, 8)) < 0.2
        reach = adj.copy()
        for k in range(8):
            reach |= reach[:, [k]] & reach[[k], :]
        assert np.array_equal(transitive_closure(ChargeStateGraph(4, adj)).adj, reach)


# -- mfc ----------------------------------------------------------------------


def test_two_path_values():
    alpha = solve_alpha(two_path_demo(), EXHAUSTIVE).alpha
    assert alpha[U1, U3] == 5
    # Full battery: drop to 5 at v2, then back up to the cap.
    assert alpha[V1, V3] == 10
    assert np.array_equal(alpha, oracle_alpha_all_pairs(two_path_demo()))


def test_isolated_vertices_are_unreachable():
    alpha = mfc(shortcut_matrix(3, []), 10, EXHAUSTIVE)
    expected = np.full((3, 3), NEG_INF)
    np.fill_diagonal(expected, 10)
    assert np.array_equal(alpha, expected)


def test_pumping_cycle_reaches_full_charge():
    g = np.full((2, 2), NEG_INF)
    g[0, 1], g[1, 0] = 3, -1
    graph = EnergyGraph(g, 10)
    res = solve_alpha(graph, EXHAUSTIVE)
    assert res.alpha[0, 1] == 10
    assert res.closure.has(0, ZERO, 1, FULL)
    assert oracle_alpha_all_pairs(graph, 0)[0, 1] == 10


# -- beta ----------------------------------------------------------------------


def test_two_path_min_initial_charge():
    beta = min_initial_charge(two_path_demo(), EXHAUSTIVE)
    assert beta[V1, V3] == 5
    assert beta[U1, U3] == 0
    assert np.all(np.diag(beta) == 0)
    assert beta[V3, V1] == POS_INF
    assert np.array_equal(beta, oracle_min_initial(two_path_demo()))


# -- properties -----------------------------------------------------------------


@given(small_graphs(max_n=6, max_B=6))
def test_closure_arcs_are_achievable(graph):
    graph = normalize(graph)
    closure = solve_alpha(graph, EXHAUSTIVE).closure
    truth = {ZERO: oracle_alpha_all_pairs(graph, 0), FULL: oracle_alpha_all_pairs(graph)}
    level = {ZERO: 0, FULL: graph.B}
    for lu in (ZERO, FULL):
        for lv in (ZERO, FULL):
            for s, t in zip(*np.nonzero(closure.block(lu, lv))):
                assert truth[lu][s, t] >= level[lv], (s, t, lu, lv)


@given(small_graphs(max_n=6, max_B=6))
def test_exhaustive_alpha_equals_oracle(graph):
    assert np.array_equal(solve_alpha(graph, EXHAUSTIVE).alpha, oracle_alpha_all_pairs(graph))


@given(small_graphs(max_n=5, max_B=6))
def test_sampled_alpha_never_overclaims(graph):
    alpha = solve_alpha(graph, EngineConfig(seed=3)).alpha
    assert np.all(alpha <= oracle_alpha_all_pairs(graph))


@given(small_graphs(max_n=5, max_B=6))
def test_beta_equals_oracle(graph):
    assert np.array_equal(min_initial_charge(graph, EXHAUSTIVE), oracle_min_initial(graph))
