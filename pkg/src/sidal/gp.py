"""Exact Gaussian-process regression with online output standardization.

The posterior is fitted on standardized observations ``(y - y_mean) / y_std``
with kernel ``k`` and noise variance ``noise_var``; every query returns values
in the raw output frame (means shifted and scaled back, variances multiplied
by ``y_std**2``) unless ``raw=False`` is passed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import kernels

JITTER_START = 1e-10
JITTER_MAX = 1e-4
VAR_CLIP_TOL = 1e-10


class SingularKernelError(linalg.LinAlgError):
    """Cholesky factorization failed even at the largest jitter."""


def robust_cholesky(A):
    """Lower Cholesky factor of ``A + jitter * I`` with jitter escalation.

    Jitter starts at ``1e-10`` and is multiplied by 10 up to ``1e-4``.

    Returns
    -------
    L : ndarray
    jitter : float
    """
    A = np.asarray(A, dtype=float)
    eye = np.eye(A.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            L = linalg.cholesky(A + jitter * eye, lower=True, check_finite=False)
            if np.all(np.diag(L) > 0):
                return L, jitter
        except linalg.LinAlgError:
            pass
        jitter *= 10.0
    raise SingularKernelError(
        f"Cholesky failed with jitter up to {JITTER_MAX:g} (n={A.shape[0]})"
    )


@dataclass(frozen=True)
class Dataset:
    """Training inputs, raw observations and standardization statistics."""

    X: np.ndarray
    y: np.ndarray
    noise_var: float = 1e-4
    y_mean: float = 0.0
    y_std: float = 1.0

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ValueError("noise_var must be strictly positive")
        if len(self.X) != len(self.y):
            raise ValueError("X and y lengths differ")
        if not self.y_std > 0:
            raise ValueError("y_std must be positive")

    @classmethod
    def from_arrays(cls, X, y, noise_var=1e-4, standardize=True, dim=None):
        """Build a dataset, computing ``y_mean``/``y_std`` from ``y``.

        ``y_std`` stays 1 while fewer than two observations are available or
        when all observations coincide.
        """
        y = np.asarray(y, dtype=float).ravel()
        if X is None or len(y) == 0:
            d = 1 if dim is None else dim
            X = np.empty((0, d)) if X is None else np.asarray(X).reshape(0, -1)
            return cls(X, np.empty(0), noise_var, 0.0, 1.0)
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[:, None]
        y_mean, y_std = 0.0, 1.0
        if standardize:
            y_mean = float(np.mean(y))
            if len(y) >= 2:
                s = float(np.std(y))
                y_std = s if s > 0 else 1.0
        return cls(X, y, noise_var, y_mean, y_std)

    @property
    def n(self):
        return len(self.y)

    @property
    def dim(self):
        return self.X.shape[1]

    def standardized(self):
        return (self.y - self.y_mean) / self.y_std

    def append(self, x, y_new, standardize=True):
        """New dataset with one more observation and refreshed statistics."""
        x = np.asarray(x).reshape(1, -1)
        X = x if self.n == 0 else np.vstack([self.X, x.astype(self.X.dtype)])
        return Dataset.from_arrays(
            X, np.append(self.y, y_new), self.noise_var, standardize
        )


@dataclass(frozen=True)
class GpPosterior:
    """Fitted GP state. Immutable; refitting produces a new value."""

    kernel: kernels.KernelSpec
    data: Dataset
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def n(self):
        return self.data.n

    @property
    def noise_var(self):
        return self.data.noise_var


def fit(kernel, data):
    """Condition the zero-mean GP prior on ``data``.

    An empty dataset yields the prior.
    """
    if data.n == 0:
        return GpPosterior(kernel, data, np.zeros((0, 0)), np.zeros(0))
    K = kernels.gram(kernel, data.X) + data.noise_var * np.eye(data.n)
    L, jitter = robust_cholesky(K)
    alpha = linalg.cho_solve((L, True), data.standardized(), check_finite=False)
    return GpPosterior(kernel, data, L, alpha, jitter)


def _solve_lower(post, Ks):
    return linalg.solve_triangular(post.chol, Ks, lower=True, check_finite=False)


def predict(post, X, raw=True):
    """Posterior mean and variance at each row of ``X``.

    Variances below zero by less than ``1e-10`` are clipped to zero.
    """
    X = kernels._as_2d(X)
    prior = kernels.diag(post.kernel, X)
    if post.n == 0:
        mean, var = np.zeros(len(X)), prior.copy()
    else:
        Ks = kernels.cross(post.kernel, post.data.X, X)
        mean = Ks.T @ post.alpha
        V = _solve_lower(post, Ks)
        var = prior - np.sum(V**2, axis=0)
    var = np.where((var < 0) & (var > -VAR_CLIP_TOL), 0.0, var)
    var = np.clip(var, 0.0, prior)
    if raw:
        d = post.data
        return d.y_mean + d.y_std * mean, d.y_std**2 * var
    return mean, var


def mean_var(post, x):
    """Scalar posterior mean and variance at a single point."""
    m, v = predict(post, np.atleast_1d(x))
    return float(m[0]), float(v[0])


def posterior_cov_matrix(post, X1, X2, prior=None, raw=True):
    """Posterior covariance ``k_t(X1[i], X2[j])``.

    ``prior`` may supply a precomputed ``k(X1, X2)`` to skip the kernel
    evaluation (useful for cached pool Gram matrices).
    """
    K12 = kernels.cross(post.kernel, X1, X2) if prior is None else prior
    if post.n > 0:
        V1 = _solve_lower(post, kernels.cross(post.kernel, post.data.X, X1))
        V2 = _solve_lower(post, kernels.cross(post.kernel, post.data.X, X2))
        K12 = K12 - V1.T @ V2
    return post.data.y_std**2 * K12 if raw else K12


def posterior_cov(post, x, x2):
    return float(
        posterior_cov_matrix(post, np.atleast_1d(x), np.atleast_1d(x2))[0, 0]
    )


def fantasy_var_matrix(post, X_star, X_query, cov=None, var_star=None,
                       var_query=None):
    """One-step look-ahead variances ``F[i, j] = var(X_star[i] | x = X_query[j])``.

    The look-ahead variance does not depend on the hypothetical observation
    value. Optional precomputed raw-frame ``cov`` (``len(X_star) x
    len(X_query)``) and variances avoid recomputation.
    """
    s2 = post.data.y_std**2
    noise = post.noise_var * s2
    if cov is None:
        cov = posterior_cov_matrix(post, X_star, X_query)
    if var_star is None:
        var_star = predict(post, X_star)[1]
    if var_query is None:
        var_query = predict(post, X_query)[1]
    F = var_star[:, None] - cov**2 / (var_query[None, :] + noise)
    return np.maximum(F, 0.0)


def fantasy_var(post, x_star, x_query):
    """Posterior variance at ``x_star`` after a hypothetical query at ``x_query``."""
    return float(
        fantasy_var_matrix(post, np.atleast_1d(x_star), np.atleast_1d(x_query))[0, 0]
    )


def sample_path_discrete(post, pool, rng, size=None, prior=None):
    """Exact joint posterior draw(s) over a finite pool.

    Returns an array of shape ``(len(pool),)`` or ``(size, len(pool))``.
    """
    pool = kernels._as_2d(pool)
    mean, _ = predict(post, pool)
    C = posterior_cov_matrix(post, pool, pool, prior=prior)
    C = 0.5 * (C + C.T)
    scale = max(post.data.y_std**2, 1e-300)
    L, _ = robust_cholesky(C / scale)
    n = 1 if size is None else size
    z = rng.standard_normal((n, len(pool)))
    draws = mean[None, :] + np.sqrt(scale) * z @ L.T
    return draws[0] if size is None else draws


@dataclass(frozen=True)
class PathwiseSample:
    """One posterior function draw represented by random trigonometric features.

    ``f(x) = y_mean + y_std * (phi(x) @ prior_weights
    + k(x, X_train) @ correction_weights)`` with
    ``phi(x) = sqrt(2 s / D) cos(x @ feature_freqs.T + feature_phases)``.
    """

    kernel: kernels.KernelSpec
    prior_weights: np.ndarray
    feature_freqs: np.ndarray
    feature_phases: np.ndarray
    correction_weights: np.ndarray
    train_X: np.ndarray
    y_mean: float = 0.0
    y_std: float = 1.0

    @property
    def n_features(self):
        return len(self.prior_weights)

    def features(self, X):
        X = kernels._as_2d(X).astype(float)
        D = self.n_features
        amp = np.sqrt(2.0 * self.kernel.output_scale / D)
        return amp * np.cos(X @ self.feature_freqs.T + self.feature_phases)

    def __call__(self, X):
        f = self.features(X) @ self.prior_weights
        if len(self.correction_weights):
            f = f + kernels.cross(self.kernel, X, self.train_X) @ self.correction_weights
        return self.y_mean + self.y_std * f


def spectral_frequencies(kernel, d, n_features, rng):
    """Draw ``(n_features, d)`` frequencies from the kernel's spectral density.

    SE uses Gaussian frequencies; Matern-nu uses a multivariate Student-t with
    ``2 nu`` degrees of freedom.
    """
    if not kernel.stationary:
        raise NotImplementedError(
            f"random features need a stationary kernel, got {kernel.family}"
        )
    ls = kernel._scales(d)
    z = rng.standard_normal((n_features, d))
    if kernel.family == "se":
        return z / ls
    nu = 2.5 if kernel.family == "matern52" else 1.5
    u = rng.chisquare(2 * nu, size=(n_features, 1))
    return z / ls * np.sqrt(2 * nu / u)


def prior_path(kernel, d, n_features, rng):
    """A random-feature draw from the zero-mean prior."""
    freqs = spectral_frequencies(kernel, d, n_features, rng)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_features)
    w = rng.standard_normal(n_features)
    return PathwiseSample(kernel, w, freqs, phases, np.zeros(0), np.empty((0, d)))


def sample_path_continuous(post, n_features=2048, rng=None):
    """Posterior function draw by pathwise conditioning of a prior feature path."""
    rng = np.random.default_rng() if rng is None else rng
    data = post.data
    path = prior_path(post.kernel, data.dim, n_features, rng)
    if data.n == 0:
        return path
    eps = rng.normal(0.0, np.sqrt(data.noise_var), data.n)
    resid = data.standardized() - path.features(data.X) @ path.prior_weights - eps
    v = linalg.cho_solve((post.chol, True), resid, check_finite=False)
    return PathwiseSample(
        post.kernel,
        path.prior_weights,
        path.feature_freqs,
        path.feature_phases,
        v,
        data.X,
        data.y_mean,
        data.y_std,
    )


def log_marginal_likelihood(post):
    """Gaussian evidence of the standardized observations."""
    n = post.n
    if n == 0:
        return 0.0
    yc = post.data.standardized()
    return float(
        -0.5 * yc @ post.alpha
        - np.sum(np.log(np.diag(post.chol)))
        - 0.5 * n * np.log(2 * np.pi)
    )


def beta_discrete(pool_size, delta):
    """Confidence multiplier ``2 log(|X| / delta)`` for finite domains."""
    if pool_size < 1 or not 0 < delta <= 1:
        raise ValueError("need pool_size >= 1 and delta in (0, 1]")
    return 2.0 * np.log(pool_size / delta)


def information_gain(post):
    """``0.5 * log det(I + K / noise_var)`` on the realized training inputs."""
    if post.n == 0:
        return 0.0
    K = kernels.gram(post.kernel, post.data.X)
    _, logdet = np.linalg.slogdet(np.eye(post.n) + K / post.noise_var)
    return 0.5 * float(logdet)


def select_lengthscales(kernel, data, grid=None):
    """ML-II choice of an isotropic lengthscale multiplier over a log grid.

    Each grid value multiplies the kernel's current lengthscales.
    """
    if kernel.family == "tanimoto" or data.n < 2:
        return kernel
    grid = np.logspace(-1, 1, 21) if grid is None else np.asarray(grid)
    base = np.asarray(kernel._scales(data.dim))
    best, best_lml = kernel, -np.inf
    for g in grid:
        cand = kernel.with_lengthscales(base * g)
        try:
            lml = log_marginal_likelihood(fit(cand, data))
        except SingularKernelError:
            continue
        if lml > best_lml:
            best, best_lml = cand, lml
    return best


class GaussianProcess(RegressorMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`fit` and :func:`predict`.

    Parameters
    ----------
    kernel : str
        Kernel family name.
    lengthscales : float or sequence of float
    output_scale : float
    noise_var : float
        Observation noise variance in standardized output units.
    standardize : bool
        Standardize outputs by their running mean and standard deviation.
    """

    def __init__(self, kernel="matern52", lengthscales=1.0, output_scale=1.0,
                 noise_var=1e-4, standardize=True):
        self.kernel = kernel
        self.lengthscales = lengthscales
        self.output_scale = output_scale
        self.noise_var = noise_var
        self.standardize = standardize

    def _kernel_spec(self):
        return kernels.KernelSpec(
            self.kernel, tuple(np.atleast_1d(self.lengthscales)), self.output_scale
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=None, y_numeric=True)
        data = Dataset.from_arrays(X, y, self.noise_var, self.standardize)
        self.posterior_ = fit(self._kernel_spec(), data)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "posterior_")
        X = check_array(X, dtype=None)
        mean, var = predict(self.posterior_, X)
        if return_std:
            return mean, np.sqrt(var)
        return mean

    def sample_y(self, X, n_samples=1, random_state=None):
        check_is_fitted(self, "posterior_")
        rng = np.random.default_rng(random_state)
        return sample_path_discrete(self.posterior_, check_array(X, dtype=None),
                                    rng, size=n_samples)

    def log_marginal_likelihood(self):
        check_is_fitted(self, "posterior_")
        return log_marginal_likelihood(self.posterior_)
