import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dvrl.data import Dataset

settings.register_profile("dvrl", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dvrl")

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_classification():
    """Six 2-d points in two well separated groups."""
    x = np.array([[-2.0, 0.1], [-1.5, -0.3], [-2.2, 0.4], [1.8, 0.0], [2.1, -0.2], [1.6, 0.5]])
    return Dataset.from_labels(x, [0, 0, 0, 1, 1, 1], 2)


@pytest.fixture
def tiny_regression():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    return Dataset(x, 2.0 * x + 1.0, task="regression")
