import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evroute.generators import (
    GeneratorError,
    GenSpec,
    double_funnel_gains,
    gen_double_funnel,
    gen_funnel_path,
    gen_random,
    generate,
    short_monotone_subpaths,
    two_path_demo,
)
from evroute.graph import InvalidCapacityError
from evroute.paths import is_funnel
from evroute.stage1 import ShortcutTable, short_shortcuts

# -- random graphs --------------------------------------------------------------


def test_density_zero_has_no_arcs():
    assert gen_random(GenSpec(n=5, density=0.0)).m == 0


def test_density_one_is_complete():
    assert gen_random(GenSpec(n=3, density=1.0)).m == 6


def test_same_seed_same_graph():
    spec = GenSpec(n=7, density=0.4, seed=99)
    assert gen_random(spec) == gen_random(spec)
    assert gen_random(spec) != gen_random(GenSpec(n=7, density=0.4, seed=100))


@pytest.mark.parametrize("kwargs,error", [
    ({"density": 1.5}, GeneratorError),
    ({"gain_bound": 13, "B": 12}, GeneratorError),
    ({"B": 0}, InvalidCapacityError),
    ({"kind": "grid"}, GeneratorError),
    ({"n": 0}, GeneratorError),
])
def test_invalid_specs_are_rejected(kwargs, error):
    with pytest.raises(error):
        GenSpec(**kwargs)


@given(st.integers(1, 8), st.floats(0, 1), st.integers(1, 12), st.integers(0, 2**31))
def test_random_gains_respect_the_bound(n, density, B, seed):
    g = gen_random(GenSpec(n=n, density=density, gain_bound=B, B=B, seed=seed))
    finite = g.gains[np.isfinite(g.gains)]
    assert np.all(np.abs(finite) <= B)
    assert not np.isfinite(np.diag(g.gains)).any()


# -- funnel paths -----------------------------------------------------------------


def test_funnel_paths():
    assert gen_funnel_path([-5, 4, -3, 2]).m == 4
    assert gen_funnel_path([-1]).m == 1
    with pytest.raises(GeneratorError):
        gen_funnel_path([-5, 4, -4])


# -- double funnel --------------------------------------------------------------------


def test_small_double_funnel_has_only_the_tail():
    gains = double_funnel_gains(6, 32)
    assert short_monotone_subpaths(gains, 32) == [(2, 5)]
    gen_double_funnel(6, 32)


@pytest.mark.parametrize("k", [4, 5, 7])
def test_double_funnel_rejects_bad_lengths(k):
    with pytest.raises(GeneratorError):
        gen_double_funnel(k, 100)


def test_double_funnel_needs_room_for_the_ramp():
    with pytest.raises(InvalidCapacityError):
        gen_double_funnel(10, 6)


@pytest.mark.parametrize("k", [6, 8, 12, 20, 40])
def test_double_funnel_prefix_splits_into_two_funnels(k):
    B = 4 * k
    g = gen_double_funnel(k, B)
    prefix = list(range(k - 1))
    assert is_funnel(g, prefix[:3]) and is_funnel(g, prefix[1:])
    assert short_monotone_subpaths(double_funnel_gains(k, B), B) == [(k - 4, k - 1)]


def test_one_short_pass_only_shortens_the_tail():
    k, B = 6, 32
    gains = double_funnel_gains(k, B)
    table = short_shortcuts(ShortcutTable.initial(gen_double_funnel(k, B)))
    # Entries that reach the zero-schedule gain of their subpath; charge
    # drops give the others only lower, descending values.
    reached = [(i, j) for i in range(k) for j in range(i + 2, k)
               if table.M[i, j] >= sum(gains[i:j])]
    assert reached == [(k - 4, k - 1)]


# -- dispatch ---------------------------------------------------------------------------


def test_generate_dispatches_on_kind():
    assert generate(GenSpec(kind="two_path_demo", B=10)) == two_path_demo(10)
    assert generate(GenSpec(kind="funnel", gains=(-5, 4, -3, 2), B=10)).m == 4
    assert generate(GenSpec(kind="double_funnel", n=6, B=12)).n == 6
