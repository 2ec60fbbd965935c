import numpy as np
import pytest
from hypothesis import strategies as st

from latecount import synthetic
from latecount.geodata import DistanceDistribution

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")


@pytest.fixture(scope="session")
def fixture_paths():
    return tuple(str(p) for p in synthetic.fixture_paths())


@pytest.fixture(scope="session")
def fixture_data():
    return synthetic.generate()


def random_dist(gen: np.random.Generator, n: int | None = None) -> DistanceDistribution:
    """Weighted distribution with a random number of atoms and a random x_max."""
    n = n or int(gen.integers(10, 2000))
    x_max = gen.uniform(1.0, 300.0)
    x = gen.uniform(0.0, x_max, n)
    w = gen.gamma(0.5, 1.0, n) + 1e-12
    return DistanceDistribution(x, w)


@st.composite
def distributions(draw, min_atoms=2, max_atoms=40):
    n = draw(st.integers(min_atoms, max_atoms))
    xs = draw(st.lists(st.floats(0.0, 500.0, allow_nan=False), min_size=n, max_size=n))
    ws = draw(st.lists(st.floats(1e-3, 1e3, allow_nan=False), min_size=n, max_size=n))
    return DistanceDistribution(np.array(xs), np.array(ws))
