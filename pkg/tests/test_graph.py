import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evroute.graph import (
    NEG_INF,
    EnergyGraph,
    EnergyGraphError,
    InvalidCapacityError,
    from_arcs,
    is_normalized,
    normalize,
    path_graph,
)

from conftest import small_graphs


def one_arc(g, B=10):
    return from_arcs(2, [(0, 1, g)], B)


def test_normalize_drops_arcs_below_minus_B():
    assert normalize(one_arc(-12)).gain(0, 1) == NEG_INF


def test_normalize_caps_gain_at_B():
    assert normalize(one_arc(15)).gain(0, 1) == 10


def test_normalize_keeps_boundary():
    assert normalize(one_arc(-10)).gain(0, 1) == -10


def test_normalize_leaves_diagonal():
    g = np.full((2, 2), NEG_INF)
    g[0, 0] = 25
    assert normalize(EnergyGraph(g, 10)).gains[0, 0] == 25


@pytest.mark.parametrize("B", [0, -3, 2.5])
def test_bad_capacity_rejected(B):
    with pytest.raises(InvalidCapacityError):
        EnergyGraph(np.zeros((1, 1)), B)


def test_fractional_gain_rejected():
    with pytest.raises(EnergyGraphError):
        EnergyGraph(np.array([[NEG_INF, 0.5], [NEG_INF, NEG_INF]]), 4)


def test_gains_are_read_only():
    g = path_graph([1, 2], 5)
    with pytest.raises(ValueError):
        g.gains[0, 1] = 4


def test_from_arcs_keeps_max_parallel_gain():
    g = from_arcs(2, [(0, 1, 3), (0, 1, 5), (0, 1, -1)], 10)
    assert g.gain(0, 1) == 5
    assert g.m == 1


def test_reversed_transposes():
    g = path_graph([4, -2], 5)
    r = g.reversed()
    assert r.gain(1, 0) == 4 and r.gain(2, 1) == -2
    assert r.gain(0, 1) == NEG_INF


def test_negative_infinity_absorbs_and_orders():
    assert NEG_INF + 7 == NEG_INF
    assert NEG_INF < -10**15


@given(small_graphs(max_B=6))
def test_normalize_is_idempotent_and_bounded(graph):
    once = normalize(graph)
    assert is_normalized(once)
    assert normalize(once) == once
