import numpy as np
import pytest

from mixbayes.model import MixtureModel, NoiseModel


def random_cov(rng, n, rank, scale=1.0):
    B = rng.standard_normal((n, rank)) * scale
    return B @ B.T


def random_model(rng, n, L, ranks=None, mean_scale=1.0, cov_scale=1.0):
    """Mixture with mixed-rank covariances; ``ranks`` defaults to random in 0..n."""
    if ranks is None:
        ranks = rng.integers(0, n + 1, size=L)
    w = rng.dirichlet(np.ones(L))
    mu = rng.standard_normal((L, n)) * mean_scale
    cov = np.stack([random_cov(rng, n, int(r), cov_scale) for r in ranks])
    return MixtureModel(w, mu, cov)


def random_noise(rng, m, full=False):
    if full:
        C = rng.standard_normal((m, m))
        return NoiseModel.full(0.3 * C @ C.T + 0.2 * np.eye(m))
    return NoiseModel.iso(float(rng.uniform(0.2, 1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(criterion: int, ok, detail: str = ""):
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    ACCEPTANCE[criterion] = f"criterion {criterion:2d}: {status}  {detail}".rstrip()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
