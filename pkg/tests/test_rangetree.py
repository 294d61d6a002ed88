import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evroute.graph import NEG_INF
from evroute.rangetree import (
    BatchedBoxMax,
    BatchedPrefixMax,
    BatchedQuadrant,
    MaxRangeTree2D,
)

# -- reference linear scans ----------------------------------------------------


def scan_best(pairs, keep):
    hits = [(k1, k2, tag) for tag, (k1, k2) in enumerate(pairs) if keep(k1, k2)]
    hits = [h for h in hits if h[1] != NEG_INF]
    if not hits:
        return None
    top = max(h[1] for h in hits)
    return min((h for h in hits if h[1] == top), key=lambda h: h[2])


def as_tuple(hit):
    return None if hit is None else (hit.k1, hit.k2, hit.tag)


# -- examples --------------------------------------------------------------------


def test_empty_tree_finds_nothing():
    t = MaxRangeTree2D([])
    assert len(t) == 0
    assert t.max_k2_in_k1_range(-10, 10) is None
    assert t.max_k2_in_box(10, 10) is None
    assert not t.exists_in_quadrant(-10, 10)


def test_range_max_two_pairs():
    assert MaxRangeTree2D([(1, 5), (2, 7)]).max_k2_in_k1_range(1, 2).k2 == 7


def test_range_max_duplicate_keys():
    assert MaxRangeTree2D([(1, 5), (1, 9)]).max_k2_in_k1_range(1, 1).k2 == 9


@pytest.mark.parametrize("lo,hi,expected", [(-3, -1, 4), (5, 9, None), (-3, 0, 9), (0, -3, None)])
def test_range_max_examples(lo, hi, expected):
    t = MaxRangeTree2D([(-3, 4), (-1, 2), (0, 9)])
    hit = t.max_k2_in_k1_range(lo, hi)
    assert (hit.k2 if hit else None) == expected


def test_box_examples():
    t = MaxRangeTree2D([(1, 3), (2, 5)])
    hit = t.max_k2_in_box(2, 4)
    assert (hit.k1, hit.k2) == (1, 3)
    assert t.max_k2_in_box(2, 2) is None
    assert t.max_k2_in_box(0, 10) is None


def test_quadrant_examples():
    assert MaxRangeTree2D([(4, 1)]).exists_in_quadrant(3, 2)
    assert not MaxRangeTree2D([(4, 5)]).exists_in_quadrant(3, 2)


def test_ties_return_smallest_tag():
    t = MaxRangeTree2D([(0, 5, "b"), (1, 5, "a"), (2, 5, "c")])
    assert t.max_k2_in_k1_range(0, 2).tag == "a"


def test_negative_infinity_values_are_not_found():
    t = MaxRangeTree2D([(0, NEG_INF)])
    assert t.max_k2_in_k1_range(-1, 1) is None


# -- randomized equivalence with a linear scan ------------------------------------


def test_random_trees_match_linear_scan():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m = int(rng.integers(0, 201))
        pairs = [tuple(int(x) for x in p) for p in rng.integers(-50, 51, (m, 2))]
        t = MaxRangeTree2D(pairs)
        for _ in range(3):
            a, b = sorted(int(x) for x in rng.integers(-55, 56, 2))
            c, d = (int(x) for x in rng.integers(-55, 56, 2))
            assert as_tuple(t.max_k2_in_k1_range(a, b)) == scan_best(
                pairs, lambda k1, k2: a <= k1 <= b)
            assert as_tuple(t.max_k2_in_box(c, d)) == scan_best(
                pairs, lambda k1, k2: k1 <= c and k2 <= d)
            assert t.exists_in_quadrant(c, d) == any(k1 >= c and k2 <= d for k1, k2 in pairs)


@given(st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), max_size=30),
       st.integers(-10, 10), st.integers(-10, 10))
def test_queries_match_scan_property(pairs, q1, q2):
    t = MaxRangeTree2D(pairs)
    lo, hi = min(q1, q2), max(q1, q2)
    assert as_tuple(t.max_k2_in_k1_range(lo, hi)) == scan_best(
        pairs, lambda k1, k2: lo <= k1 <= hi)
    assert as_tuple(t.max_k2_in_box(q1, q2)) == scan_best(
        pairs, lambda k1, k2: k1 <= q1 and k2 <= q2)
    assert t.exists_in_quadrant(q1, q2) == any(k1 >= q1 and k2 <= q2 for k1, k2 in pairs)


# -- batched kernels against brute force ---------------------------------------------


def masked(rng, shape, lo, hi, p_missing=0.3):
    x = rng.integers(lo, hi + 1, shape).astype(float)
    x[rng.random(shape) < p_missing] = np.inf
    return x


def test_batched_prefix_max_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(50):
        G, m, X = (int(v) for v in rng.integers(1, 8, 3))
        keys = masked(rng, (G, m), -6, 6)
        vals = rng.integers(-9, 10, (G, m, X)).astype(float)
        pm = BatchedPrefixMax(keys, vals)
        group = rng.integers(0, G, 40)
        bound = rng.integers(-8, 9, 40).astype(float)
        best, arg = pm.query(group, bound)
        for q in range(40):
            ok = keys[group[q]] <= bound[q]
            for x in range(X):
                want = vals[group[q], ok, x].max() if ok.any() else NEG_INF
                assert best[q, x] == want
                if ok.any():
                    j = arg[q, x]
                    assert ok[j] and vals[group[q], j, x] == want


def test_batched_box_max_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(80):
        G, m = (int(v) for v in rng.integers(1, 10, 2))
        k1 = rng.integers(-6, 7, (G, m)).astype(float)
        k2 = masked(rng, (G, m), -6, 6)
        box = BatchedBoxMax(k1, k2)
        group = rng.integers(0, G, 30)
        q1 = rng.integers(-8, 9, 30).astype(float)
        q2 = rng.integers(-8, 9, 30).astype(float)
        best, arg = box.query(group, q1, q2)
        for q in range(30):
            ok = (k1[group[q]] <= q1[q]) & (k2[group[q]] <= q2[q])
            want = k2[group[q], ok].max() if ok.any() else NEG_INF
            assert best[q] == want
            if ok.any():
                assert ok[arg[q]] and k2[group[q], arg[q]] == want
            else:
                assert arg[q] == -1


def test_batched_quadrant_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(80):
        G, m = (int(v) for v in rng.integers(1, 10, 2))
        k1 = masked(rng, (G, m), -6, 6)
        k2 = rng.integers(-6, 7, (G, m)).astype(float)
        quad = BatchedQuadrant(k1, k2)
        group = rng.integers(0, G, 30)
        q1 = rng.integers(-8, 9, 30).astype(float)
        q2 = rng.integers(-8, 9, 30).astype(float)
        found, arg = quad.query(group, q1, q2)
        for q in range(30):
            ok = np.isfinite(k1[group[q]]) & (k1[group[q]] >= q1[q]) & (k2[group[q]] <= q2[q])
            assert found[q] == ok.any()
            if ok.any():
                assert ok[arg[q]]
