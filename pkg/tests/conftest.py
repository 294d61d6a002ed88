import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from evroute.graph import NEG_INF, EnergyGraph

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@st.composite
def small_graphs(draw, max_n=5, max_B=8, density=0.6):
    """Random energy graphs with integer gains in [-B, B] and no self-loops."""
    n = draw(st.integers(1, max_n))
    B = draw(st.integers(1, max_B))
    cells = draw(st.lists(
        st.one_of(st.none(), st.integers(-B, B)), min_size=n * n, max_size=n * n))
    g = np.full((n, n), NEG_INF)
    for idx, value in enumerate(cells):
        u, v = divmod(idx, n)
        if u != v and value is not None and draw(st.floats(0, 1)) < density:
            g[u, v] = value
    return EnergyGraph(g, B)


def random_graph(rng, n, B, density=0.5, bound=None):
    bound = B if bound is None else bound
    present = rng.random((n, n)) < density
    g = np.where(present, rng.integers(-bound, bound + 1, (n, n)).astype(float), NEG_INF)
    np.fill_diagonal(g, NEG_INF)
    return EnergyGraph(g, B)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance verdicts ------------------------------------------------------------

ACCEPTANCE_CRITERIA = 11
_verdicts: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record and assert one acceptance criterion: ``verdict(number, ok, detail)``."""

    def record(number: int, ok: bool, detail: str) -> None:
        _verdicts[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance" in r.nodeid
              for key in ("passed", "failed", "error")
              for r in terminalreporter.stats.get(key, []))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, ACCEPTANCE_CRITERIA + 1):
        ok, detail = _verdicts.get(number, (False, "not reached"))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
