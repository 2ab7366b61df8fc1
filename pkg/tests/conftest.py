import numpy as np
import pytest

from mdem.mechanics import MaterialParams


def random_F(n, rng, j_lo=0.2, j_hi=5.0):
    """Random 2x2 deformation gradients with det F uniform in [j_lo, j_hi]."""
    F = np.eye(2) + 0.6 * rng.standard_normal((n, 2, 2))
    J = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    flip = J < 0
    F[flip, :, 0] *= -1.0
    J = np.abs(J)
    target = rng.uniform(j_lo, j_hi, n)
    return F * np.sqrt(target / np.maximum(J, 1e-300))[:, None, None]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def material():
    return MaterialParams.from_engineering(1000.0, 0.3)


# lines emitted by the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
