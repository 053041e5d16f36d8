import numpy as np
import pytest

from gradalign.linalg import SparseMatrix


@pytest.fixture
def diag12():
    return SparseMatrix.diag([1.0, 2.0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.summary_lines():
            terminalreporter.write_line(line)
