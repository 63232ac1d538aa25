import numpy as np
import pytest

from ouarea.model import build_model

ACCEPTANCE_RESULTS = {}


def random_stable_model(rng, d, min_rate=0.3, scale=1.0):
    """Random stable drift with correlated, well-conditioned noise."""
    M = rng.normal(scale=scale, size=(d, d))
    shift = max(0.0, -np.linalg.eigvals(M).real.min()) + min_rate + rng.uniform(0, 1)
    A = M + shift * np.eye(d)
    G = np.tril(rng.normal(scale=0.4, size=(d, d)), -1) + np.diag(rng.uniform(0.5, 1.5, d))
    return build_model(A, G)


def random_equilibrium_model(rng, d):
    """Model with D^{-1} A symmetric positive definite."""
    G = np.tril(rng.normal(scale=0.4, size=(d, d)), -1) + np.diag(rng.uniform(0.5, 1.5, d))
    D = G @ G.T
    B = rng.normal(size=(d, d))
    S = B @ B.T + 0.5 * np.eye(d)
    return build_model(D @ S, G)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
