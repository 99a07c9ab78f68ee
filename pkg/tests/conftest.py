import numpy as np
import pytest

from sgfdm.geometry import Domain, generate_random_cloud, refine_midpoints

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cloud_1d_levels():
    """The 1D random cloud (N=10) and its two midpoint refinements (N=19, 37)."""
    c = generate_random_cloud(Domain.unit(1), 8, 2, seed=0)
    c2 = refine_midpoints(c)
    return [c, c2, refine_midpoints(c2)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
