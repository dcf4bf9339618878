import numpy as np
import pytest


def random_spd(rng, d, floor=0.1):
    A = rng.standard_normal((d, d))
    return A @ A.T / d + floor * np.eye(d)


def commuting_bures_sq(eig1, eig2):
    """Closed form for simultaneously diagonal covariances."""
    return float(np.sum((np.sqrt(eig1) - np.sqrt(eig2)) ** 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
