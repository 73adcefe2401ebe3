import numpy as np
import pytest

from sidal import gp, kernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_posterior(rng, n, d=2, kernel=None, noise_var=1e-4):
    kernel = kernel or kernels.KernelSpec("matern52", (0.3,) * d)
    X = rng.uniform(size=(n, d))
    y = np.sin(3 * X).sum(axis=1) + 0.1 * rng.standard_normal(n)
    return gp.fit(kernel, gp.Dataset.from_arrays(X, y, noise_var))


def dense_oracle(post, Xq):
    """Posterior mean and covariance by a direct linear solve (no Cholesky)."""
    d = post.data
    A = kernels.gram(post.kernel, d.X) + (d.noise_var + post.jitter) * np.eye(d.n)
    Kq = kernels.cross(post.kernel, d.X, Xq)
    mean = d.y_mean + d.y_std * Kq.T @ np.linalg.solve(A, d.standardized())
    cov = d.y_std**2 * (kernels.cross(post.kernel, Xq, Xq) - Kq.T @ np.linalg.solve(A, Kq))
    return mean, cov


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line and assert it."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def report(number, name, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}  {detail}"
        store[number] = line
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for number in sorted(store):
            terminalreporter.write_line(store[number])
