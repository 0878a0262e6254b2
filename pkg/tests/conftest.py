import numpy as np
import pytest

from ppgp.posterior import PosteriorContext
from ppgp.quadrature import Domain

ACCEPTANCE_LINES = []


class FlatContext(PosteriorContext):
    """Posterior context whose likelihood is identically zero."""

    def log_likelihood(self, nu, cache, integral_term=True):
        return 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_domain():
    return Domain([0.0], [1.0])


@pytest.fixture
def synthetic_domain():
    return Domain([0.0], [50.0])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
