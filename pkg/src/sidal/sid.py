"""Boltzmann self-induced densities and their tractable surrogates.

All log-densities are vectorized: ``log_unnorm(X)`` takes an ``(m, d)`` array
and returns ``m`` values. They work in the raw output frame, so ``lam`` keeps
the units of the observations.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from . import gp, kernels


class DensityRatioViolation(AssertionError):
    pass


class ConstantBias:
    """Bias ``b(x) = value``."""

    def __init__(self, value=0.0):
        self.value = float(value)

    def __call__(self, X):
        return np.full(kernels._as_2d(X).shape[0], self.value)

    def __repr__(self):
        return f"ConstantBias({self.value!r})"


class GpPriorBias:
    """Bias given by a fixed random-feature draw from a GP prior.

    The path is a finite trigonometric sum and therefore bounded.
    """

    def __init__(self, kernel, dim, scale=1.0, seed=0, n_features=1024):
        self.kernel = kernel
        self.dim = dim
        self.scale = float(scale)
        self.seed = seed
        self._path = gp.prior_path(
            kernel, dim, n_features, np.random.default_rng(seed)
        )

    def __call__(self, X):
        return self.scale * self._path(X)

    def __repr__(self):
        return f"GpPriorBias(seed={self.seed}, scale={self.scale})"


@dataclass(frozen=True)
class BoltzmannSpec:
    """``P_f(x) ∝ exp(lam * f(x) + bias(x))``."""

    lam: float = 1.0
    bias: Callable = field(default_factory=ConstantBias)

    def __post_init__(self):
        if self.lam == 0 or not np.isfinite(self.lam):
            raise ValueError("lam must be a finite nonzero real")

    def b(self, X):
        return np.asarray(self.bias(X), dtype=float)


@dataclass(frozen=True)
class SurrogateDensity:
    """Unnormalized log-density over the input domain.

    ``kind`` is one of ``"truth"``, ``"absid"``, ``"tssid"``, ``"ghal"``.
    """

    kind: str
    log_unnorm: Callable
    provenance: dict = field(default_factory=dict)

    def __call__(self, X):
        return self.log_unnorm(X)


def log_unnorm_truth(spec, f, X):
    """``lam * f(x) + b(x)``."""
    return spec.lam * np.asarray(f(X), dtype=float) + spec.b(X)


def truth_density(spec, f):
    return SurrogateDensity(
        "truth", lambda X: log_unnorm_truth(spec, f, X), {"oracle": f}
    )


def absid_log_unnorm(post, spec, X):
    mu, var = gp.predict(post, X)
    return spec.lam * mu + 0.5 * spec.lam**2 * var + spec.b(X)


def first_order_factor(post, spec, X, pool, pool_log_unnorm=None, pool_gram=None):
    """``1 - sum_x' p(x') (exp(lam^2 k_t(x, x')) - 1)`` over the pool.

    ``p`` is the normalized zero-order surrogate on ``pool``. Multiplying the
    zero-order estimate by this factor adds the first-order correction of the
    Taylor expansion of ``E[A / B]`` around ``E[B]``.
    """
    if pool_log_unnorm is None:
        pool_log_unnorm = absid_log_unnorm(post, spec, pool)
    p = softmax(pool_log_unnorm)
    cov = gp.posterior_cov_matrix(post, X, pool, prior=pool_gram)
    return 1.0 - np.expm1(spec.lam**2 * cov) @ p


def expected_density(post, spec, pool, first_order=False, pool_gram=None):
    """Estimate of the Bayesian SID ``E_{f|D}[P_f]`` on a finite pool.

    Zero order is the normalized AB-SID surrogate. With ``first_order`` the
    first-order correction is added, negative entries are clipped to zero and
    the vector is renormalized over the pool. Use :func:`first_order_factor`
    for the raw correction.
    """
    lu = absid_log_unnorm(post, spec, pool)
    p0 = softmax(lu)
    if not first_order:
        return p0
    p1 = np.clip(p0 * first_order_factor(post, spec, pool, pool, lu, pool_gram), 0.0, None)
    total = p1.sum()
    return p1 / total if total > 0 else p0


def build_absid(post, spec, first_order=False, pool=None, pool_gram=None):
    """Closed-form surrogate ``lam mu + lam^2 sigma^2 / 2 + b``.

    With ``first_order=True`` (finite pools only) the log-density also carries
    the log of the first-order correction factor, floored at ``1e-300``.
    """
    if not first_order:
        return SurrogateDensity(
            "absid",
            lambda X: absid_log_unnorm(post, spec, X),
            {"posterior": post, "first_order": False},
        )
    if pool is None:
        raise ValueError("the first-order correction needs a finite pool")
    pool_lu = absid_log_unnorm(post, spec, pool)

    def log_unnorm(X):
        fac = first_order_factor(post, spec, X, pool, pool_lu)
        return absid_log_unnorm(post, spec, X) + np.log(np.maximum(fac, 1e-300))

    return SurrogateDensity(
        "absid", log_unnorm, {"posterior": post, "first_order": True, "pool": pool}
    )


def build_tssid(path, spec):
    """Thompson surrogate ``lam * f_sample(x) + b(x)`` for one fixed draw.

    ``path`` is a callable (e.g. :class:`gp.PathwiseSample`) or, for finite
    pools, a :class:`PoolPath`.
    """
    return SurrogateDensity(
        "tssid",
        lambda X: spec.lam * np.asarray(path(X), dtype=float) + spec.b(X),
        {"path": path},
    )


class PoolPath:
    """Joint posterior draw over a pool, evaluated by row lookup."""

    def __init__(self, pool, values):
        self.pool = kernels._as_2d(pool)
        self.values = np.asarray(values, dtype=float)
        self._index = {self._key(row): i for i, row in enumerate(self.pool)}

    @staticmethod
    def _key(row):
        return np.ascontiguousarray(row).tobytes()

    def __call__(self, X):
        X = kernels._as_2d(X).astype(self.pool.dtype)
        try:
            return self.values[[self._index[self._key(r)] for r in X]]
        except KeyError as err:
            raise KeyError("point not in the sampled pool") from err


def build_ghal_tilt(post, spec, tau_explore=0.0):
    """``lam * (mu - tau_explore * sigma) + b``."""
    if tau_explore < 0:
        raise ValueError("tau_explore must be non-negative")

    def log_unnorm(X):
        mu, var = gp.predict(post, X)
        return spec.lam * (mu - tau_explore * np.sqrt(var)) + spec.b(X)

    return SurrogateDensity(
        "ghal", log_unnorm, {"posterior": post, "tau_explore": tau_explore}
    )


def softmax(log_values):
    log_values = np.asarray(log_values, dtype=float)
    z = log_values - np.max(log_values)
    w = np.exp(z)
    return w / w.sum()


def normalize_discrete(dens, pool):
    """Normalized probabilities of a surrogate over a finite pool."""
    return softmax(dens(pool))


def log_density_ratio_check(g1, g2, spec, grid, tol=1e-9):
    """Check ``|log P_g1 - log P_g2| <= |lam| (|g1 - g2| + max |g1 - g2|)``.

    Returns a dict with the largest gap, the smallest slack and per-point
    arrays. Raises :class:`DensityRatioViolation` when the bound fails.
    """
    grid = kernels._as_2d(grid)
    if len(grid) < 2:
        raise ValueError("grid needs at least two points")
    v1, v2 = np.asarray(g1(grid), float), np.asarray(g2(grid), float)
    b = spec.b(grid)
    l1 = spec.lam * v1 + b
    l2 = spec.lam * v2 + b
    logp1 = l1 - logsumexp(l1)
    logp2 = l2 - logsumexp(l2)
    gap = np.abs(logp1 - logp2)
    delta = np.abs(v1 - v2)
    bound = abs(spec.lam) * (delta + delta.max())
    slack = bound - gap
    report = {
        "max_gap": float(gap.max()),
        "min_slack": float(slack.min()),
        "gap": gap,
        "bound": bound,
    }
    if np.any(gap > bound + tol):
        raise DensityRatioViolation(
            f"log-density gap exceeds bound by {-slack.min():.3e}"
        )
    return report
