import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from sidal import gp, kernels
from sidal.gp import Dataset, GaussianProcess
from sidal.kernels import KernelSpec

from conftest import dense_oracle, make_posterior

SE1 = KernelSpec("se", (1.0,))


def prior_post(kernel=SE1, d=1):
    return gp.fit(kernel, Dataset.from_arrays(None, [], 1e-4, dim=d))


def test_prior_when_empty():
    post = prior_post()
    m, v = gp.predict(post, np.linspace(0, 1, 5)[:, None])
    np.testing.assert_array_equal(m, 0.0)
    np.testing.assert_array_equal(v, 1.0)


def test_single_point_mean_recovers_observation():
    post = gp.fit(SE1, Dataset.from_arrays([[0.3]], [2.7], 1e-4))
    assert abs(gp.mean_var(post, [0.3])[0] - 2.7) < 1e-3


def test_single_point_closed_form_standardized_frame():
    # mu(x1) = k y / (k + tau^2) with y standardized by an externally fixed frame
    data = Dataset(np.array([[0.3]]), np.array([2.0]), 1e-4, 0.5, 1.0)
    post = gp.fit(SE1, data)
    expected = 0.5 + 1.5 / (1 + 1e-4 + post.jitter)
    assert gp.mean_var(post, [0.3])[0] == pytest.approx(expected, abs=1e-12)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.zeros(3), 1e-4)
    d = Dataset.from_arrays([[0.0], [1.0]], [3.0, 3.0])
    assert d.y_std == 1.0
    d = Dataset.from_arrays([[0.0]], [3.0])
    assert d.y_std == 1.0 and d.y_mean == 3.0


def test_matches_dense_solve(rng):
    for _ in range(30):
        post = make_posterior(rng, int(rng.integers(1, 21)))
        Xq = np.vstack([post.data.X, rng.uniform(size=(10, 2))])
        mean, cov = dense_oracle(post, Xq)
        m, v = gp.predict(post, Xq)
        np.testing.assert_allclose(m, mean, atol=1e-8)
        np.testing.assert_allclose(v, np.clip(np.diag(cov), 0, None), atol=1e-8)
        np.testing.assert_allclose(gp.posterior_cov_matrix(post, Xq, Xq), cov, atol=1e-8)


def test_training_point_variance_small(rng):
    post = make_posterior(rng, 8)
    _, v = gp.predict(post, post.data.X, raw=False)
    assert np.all(v < 10 * post.noise_var)


def test_far_field_recovers_prior():
    post = gp.fit(SE1, Dataset.from_arrays([[0.0], [0.5]], [1.0, -1.0]))
    _, v = gp.predict(post, [[50.0]], raw=False)
    assert abs(v[0] - 1.0) < 1e-6


def test_variance_below_prior(rng):
    post = make_posterior(rng, 12)
    X = rng.uniform(size=(200, 2))
    _, v = gp.predict(post, X, raw=False)
    assert np.all(v >= 0) and np.all(v <= post.kernel.output_scale)


def test_posterior_cov_cases(rng):
    post = make_posterior(rng, 6)
    x, x2 = rng.uniform(size=(2, 2))
    assert gp.posterior_cov(post, x, x2) == pytest.approx(gp.posterior_cov(post, x2, x), abs=1e-15)
    assert gp.posterior_cov(post, x, x) == pytest.approx(gp.mean_var(post, x)[1], abs=1e-12)
    v1, v2 = gp.mean_var(post, x)[1], gp.mean_var(post, x2)[1]
    assert abs(gp.posterior_cov(post, x, x2)) <= np.sqrt(v1 * v2) + 1e-10
    prior = prior_post(KernelSpec("matern52", (0.3, 0.3)), d=2)
    assert gp.posterior_cov(prior, x, x2) == pytest.approx(
        kernels.evaluate(prior.kernel, x, x2), abs=1e-15
    )


def refit_fantasy(post, x_star, x_query, y_dummy=0.0):
    d = post.data
    dd = Dataset(np.vstack([d.X, x_query]), np.append(d.y, y_dummy), d.noise_var,
                 d.y_mean, d.y_std)
    return gp.mean_var(gp.fit(post.kernel, dd), x_star)[1]


def test_fantasy_self_case(rng):
    post = make_posterior(rng, 5)
    x = rng.uniform(size=2)
    v = gp.mean_var(post, x)[1]
    noise = post.noise_var * post.data.y_std**2
    assert gp.fantasy_var(post, x, x) == pytest.approx(v * noise / (v + noise), rel=1e-9)


def test_fantasy_uncorrelated_point():
    k = KernelSpec("tanimoto")
    post = gp.fit(k, Dataset.from_arrays(None, [], 1e-4, dim=4))
    a = np.array([1, 1, 0, 0], dtype=bool)
    b = np.array([0, 0, 1, 1], dtype=bool)
    assert gp.fantasy_var(post, a, b) == gp.mean_var(post, a)[1]


def test_fantasy_matches_refit(rng):
    worst = 0.0
    for _ in range(100):
        post = make_posterior(rng, int(rng.integers(1, 15)))
        xs, xq = rng.uniform(size=(2, 2))
        y_dummy = rng.normal()
        worst = max(worst, abs(gp.fantasy_var(post, xs, xq) - refit_fantasy(post, xs, xq, y_dummy)))
    assert worst < 1e-8


def test_fantasy_never_exceeds_current(rng):
    post = make_posterior(rng, 7)
    S, Q = rng.uniform(size=(30, 2)), rng.uniform(size=(20, 2))
    F = gp.fantasy_var_matrix(post, S, Q)
    assert np.all(F <= gp.predict(post, S)[1][:, None] + 1e-15)


def test_discrete_prior_marginal(rng):
    post = prior_post()
    draws = gp.sample_path_discrete(post, [[0.2]], rng, size=10_000)[:, 0]
    assert abs(draws.mean()) < 0.05
    assert abs(draws.var() - 1.0) < 0.1


def test_discrete_draw_concentrates_at_observation(rng):
    post = gp.fit(SE1, Dataset.from_arrays([[0.4]], [1.3], 1e-6))
    draws = gp.sample_path_discrete(post, [[0.4]], rng, size=1000)[:, 0]
    sd = np.sqrt(gp.mean_var(post, [0.4])[1])
    assert np.mean(np.abs(draws - 1.3) <= 3 * sd) > 0.99


def test_discrete_joint_covariance(rng):
    post = make_posterior(rng, 4, d=1, kernel=KernelSpec("se", (0.3,)))
    pool = np.array([[0.1], [0.5], [0.9]])
    draws = gp.sample_path_discrete(post, pool, rng, size=10_000)
    emp = np.cov(draws.T)
    np.testing.assert_allclose(emp, gp.posterior_cov_matrix(post, pool, pool), atol=0.05)


def test_pathwise_interpolates_training_points(rng):
    post = make_posterior(rng, 10, kernel=KernelSpec("matern52", (0.3, 0.3)))
    path = gp.sample_path_continuous(post, 2048, rng)
    assert np.all(np.abs(path(post.data.X) - post.data.y) < 0.1)


def test_pathwise_without_data_is_prior_path(rng):
    post = prior_post(KernelSpec("se", (0.3, 0.3)), d=2)
    path = gp.sample_path_continuous(post, 64, rng)
    assert len(path.correction_weights) == 0
    X = rng.uniform(size=(5, 2))
    np.testing.assert_allclose(path(X), path.features(X) @ path.prior_weights)


@pytest.mark.parametrize("family", ["se", "matern52"])
def test_pathwise_marginal_variance(family, rng):
    post = make_posterior(rng, 6, kernel=KernelSpec(family, (0.3, 0.3)))
    X = rng.uniform(size=(20, 2))
    vals = np.array([gp.sample_path_continuous(post, 2048, rng)(X) for _ in range(500)])
    np.testing.assert_allclose(vals.var(axis=0), gp.predict(post, X)[1], atol=0.1)


def test_pathwise_rejects_tanimoto():
    post = gp.fit(KernelSpec("tanimoto"), Dataset.from_arrays([[1, 0, 1]], [0.2]))
    with pytest.raises(NotImplementedError):
        gp.sample_path_continuous(post, 16, np.random.default_rng(0))


def test_lml_single_point():
    post = gp.fit(SE1, Dataset.from_arrays([[0.5]], [4.0], 1e-4))
    expected = -0.5 * np.log(2 * np.pi * (1.0 + 1e-4 + post.jitter))
    assert gp.log_marginal_likelihood(post) == pytest.approx(expected, abs=1e-12)


def test_lml_matches_dense_determinant(rng):
    for _ in range(10):
        post = make_posterior(rng, 10)
        d = post.data
        A = kernels.gram(post.kernel, d.X) + (d.noise_var + post.jitter) * np.eye(d.n)
        y = d.standardized()
        _, logdet = np.linalg.slogdet(A)
        expected = -0.5 * y @ np.linalg.solve(A, y) - 0.5 * logdet - 5 * np.log(2 * np.pi)
        assert gp.log_marginal_likelihood(post) == pytest.approx(expected, abs=1e-8)


def test_beta_discrete():
    assert gp.beta_discrete(1, 1.0) == 0.0
    assert gp.beta_discrete(100, 0.1) == pytest.approx(13.815510557964274, abs=1e-12)
    vals = [gp.beta_discrete(n, 0.05) for n in range(1, 50)]
    assert np.all(np.diff(vals) > 0)


def test_information_gain_values(rng):
    assert gp.information_gain(prior_post()) == 0.0
    post = gp.fit(SE1, Dataset.from_arrays([[0.5]], [1.0], 1e-4))
    assert gp.information_gain(post) == pytest.approx(0.5 * np.log(1 + 1e4), abs=1e-10)
    X = rng.uniform(size=(15, 1))
    gains = [gp.information_gain(gp.fit(SE1, Dataset.from_arrays(X[:n], np.zeros(n))))
             for n in range(1, 16)]
    assert np.all(np.diff(gains) >= 0)


def test_gaussian_mgf_identity(rng):
    post = make_posterior(rng, 5)
    mu, var = gp.mean_var(post, rng.uniform(size=2))
    for lam in (-2.0, -0.5, 0.5, 2.0):
        e = np.exp(lam * (mu + np.sqrt(var) * rng.standard_normal(100_000)))
        se = e.std() / np.sqrt(e.size)
        assert abs(e.mean() - np.exp(lam * mu + lam**2 * var / 2)) < 3 * se


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 12))
def test_variance_monotone_under_conditioning(seed, n):
    rng = np.random.default_rng(seed)
    k = KernelSpec("matern52", (0.3, 0.3))
    X = rng.uniform(size=(n, 2))
    grid = rng.uniform(size=(50, 2))
    prev = None
    for i in range(n + 1):
        post = gp.fit(k, Dataset(X[:i], np.zeros(i), 1e-4))
        v = gp.predict(post, grid, raw=False)[1]
        if prev is not None:
            assert np.all(v <= prev + 1e-8)
        prev = v


def test_robust_cholesky_escalates():
    A = np.ones((3, 3))
    L, jitter = gp.robust_cholesky(A)
    assert jitter >= 1e-10 and np.all(np.diag(L) > 0)
    with pytest.raises(gp.SingularKernelError):
        gp.robust_cholesky(-np.eye(2))


def test_select_lengthscales_prefers_truth(rng):
    k_true = KernelSpec("se", (0.2,))
    X = rng.uniform(size=(40, 1))
    prior = gp.fit(k_true, Dataset.from_arrays(None, [], dim=1))
    y = gp.sample_path_discrete(prior, X, rng)
    chosen = gp.select_lengthscales(KernelSpec("se", (0.2,)), Dataset.from_arrays(X, y))
    assert 0.05 < chosen.lengthscales[0] < 0.8


def test_estimator_api(rng):
    X = rng.uniform(size=(10, 2))
    y = np.sin(X).sum(axis=1)
    est = GaussianProcess(lengthscales=[0.3, 0.3])
    assert est.get_params()["noise_var"] == 1e-4
    fitted = clone(est).fit(X, y)
    m, s = fitted.predict(X, return_std=True)
    np.testing.assert_allclose(m, y, atol=1e-2)
    assert s.shape == (10,)
    assert fitted.score(X, y) > 0.99
    with pytest.raises(Exception):
        GaussianProcess().predict(X)
