import numpy as np
import pytest

from torusbie.assembly import QuadratureConfig, assemble_dense, compute_tables, dense_j_set, normalize_orientation
from torusbie.surface import get_surface

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bagel():
    return get_surface("bagel")


@pytest.fixture(scope="session")
def bagel_dense5(bagel):
    """Order-5 bagel matrix on the default grid (m_theta = 64, m_vartheta = 128)."""
    return assemble_dense(bagel, 5, QuadratureConfig.for_order(5))


@pytest.fixture(scope="session")
def bagel_table25(bagel):
    """Coefficient table covering every dense bagel matrix up to n = 25."""
    quad = QuadratureConfig(256, 128)
    s = normalize_orientation(bagel, quad)
    (table,) = compute_tables(s, quad, [(dense_j_set(25), 25)])
    return table
