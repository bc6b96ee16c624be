import numpy as np
import pytest

from mack_reserve import DgpConfig, generate_triangle
from mack_reserve.triangle import DevTriangle

T1_ROWS = [[100, 150, 180], [110, 176], [120]]
T1_CSV = "100,150,180\n110,176,\n120,,\n"


@pytest.fixture
def t1():
    return DevTriangle.from_rows(T1_ROWS)


@pytest.fixture(scope="session")
def sim_triangle():
    """A Setup-a gamma triangle with A = 11."""
    tri, _ = generate_triangle(DgpConfig(family="gamma", I_base=10, n=0, setup="a", seed=7))
    return tri


def random_triangle(rng, A, scale=100.0):
    full = np.empty((A, A))
    full[:, 0] = rng.uniform(0.5, 1.5, A) * scale
    for d in range(1, A):
        full[:, d] = full[:, d - 1] * rng.uniform(1.0, 1.6, A)
    return DevTriangle.from_full(full)


# filled by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
