import numpy as np
import pytest

from matchprior.measure import DiscreteMeasure, ParameterGrid
from matchprior.model import bernoulli_model


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def bern257():
    return bernoulli_model(ParameterGrid.uniform(0.0, 1.0, 257))


def random_prior(grid, rng, concentration=1.0):
    return DiscreteMeasure.from_weights(grid, rng.dirichlet(np.full(grid.size, concentration)))


def sparse_prior(grid, rng, k):
    """Random prior on k random grid points."""
    w = np.zeros(grid.size)
    idx = rng.choice(grid.size, size=k, replace=False)
    w[idx] = rng.dirichlet(np.ones(k))
    return DiscreteMeasure.from_weights(grid, w)


ACCEPTANCE_RESULTS = []


def record_acceptance(label: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
