import numpy as np
import pytest
from hypothesis import settings, strategies as st

from ballistic_lab.lattice import PeriodicJacobi

settings.register_profile("repo", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("repo")


@st.composite
def jacobi_operators(draw, max_q=4, R=4.0):
    """Random periodic operators in J(R)."""
    q = draw(st.integers(1, max_q))
    a = draw(st.lists(st.floats(1.05 / R, R / 3.0), min_size=q, max_size=q))
    bmax = R - 2.0 * max(a)
    b = draw(st.lists(st.floats(-bmax, bmax), min_size=q, max_size=q))
    return PeriodicJacobi(q, a, b)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def free():
    return PeriodicJacobi.free(1)


@pytest.fixture
def dimer():
    return PeriodicJacobi(2, [1.0, 1.0], [1.0, -1.0])


@pytest.fixture
def closed_q3():
    # J_0 = v v^T with v = (1, 1, 1.5): a double eigenvalue at 0, a genuinely closed gap
    return PeriodicJacobi(3, [1.0, 1.5, 1.5], [1.0, 1.0, 2.25])


# one line per acceptance criterion, shown after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
