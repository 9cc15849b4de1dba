import numpy as np
import pytest

ACCEPTANCE_LINES = []


def make_blobs(n_per=100, dim=10, separation=10.0, sigma=0.1, n_blobs=3, seed=0):
    """Gaussian blobs whose centers are pairwise ``separation`` apart."""
    rng = np.random.default_rng(seed)
    centers = np.eye(dim)[:n_blobs] * separation / np.sqrt(2)
    X = np.vstack([c + sigma * rng.standard_normal((n_per, dim)) for c in centers])
    y = np.repeat(np.arange(n_blobs), n_per)
    return X, y


@pytest.fixture(scope="session")
def blobs():
    return make_blobs()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
