"""Annealed sequential Monte Carlo over a box.

Tempering from the uniform distribution on the box (temperature 0) to the
target (temperature 1), choosing each temperature increment by bisection so
that the effective sample size lands at ``ess_ratio * N``. Particles are
resampled systematically and rejuvenated with reflected random-walk
Metropolis moves.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


class DegenerateTargetError(ValueError):
    """Every particle has zero target density."""


@dataclass(frozen=True)
class SmcConfig:
    n_particles: int = 1000
    ess_ratio: float = 0.5
    rwm_steps: int = 10
    rwm_step_size: float = 0.1
    max_temp_levels: int = 10
    bisection_tol: float = 0.01

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be at least 2")
        if not 0 < self.ess_ratio < 1:
            raise ValueError("ess_ratio must lie in (0, 1)")
        if self.rwm_steps < 1:
            raise ValueError("rwm_steps must be at least 1")
        if not self.rwm_step_size > 0:
            raise ValueError("rwm_step_size must be positive")
        if self.max_temp_levels < 1:
            raise ValueError("max_temp_levels must be at least 1")

    @classmethod
    def for_dim(cls, d, per_dim=1000, **kw):
        return cls(n_particles=per_dim * d, **kw)


@dataclass
class ParticleSet:
    positions: np.ndarray
    log_weights: np.ndarray
    temperature: float
    temperatures: tuple = ()
    forced_final: bool = False
    acceptance: tuple = ()

    @property
    def weights(self):
        return normalized_weights(self.log_weights)

    @property
    def ess(self):
        return ess(self.log_weights)

    @property
    def n(self):
        return len(self.log_weights)


def normalized_weights(log_w):
    log_w = np.asarray(log_w, dtype=float)
    return np.exp(log_w - logsumexp(log_w))


def ess(log_w):
    """``(sum w)^2 / sum w^2`` computed stably from log-weights."""
    log_w = np.asarray(log_w, dtype=float)
    if not np.any(np.isfinite(log_w)):
        return 0.0
    return float(np.exp(2 * logsumexp(log_w) - logsumexp(2 * log_w)))


def systematic_resample(weights, n, rng):
    """Indices drawn by systematic resampling.

    Index ``i`` is replicated ``floor(n w_i)`` or ``ceil(n w_i)`` times.
    """
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise ValueError("weights must have positive sum")
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0
    u = (rng.uniform() + np.arange(n)) / n
    return np.searchsorted(cdf, u, side="right").clip(0, len(w) - 1)


def reflect(x, lower, upper):
    """Fold points back into ``[lower, upper]`` by mirror reflection."""
    width = upper - lower
    u = np.mod(x - lower, 2 * width)
    u = np.where(u > width, 2 * width - u, u)
    return lower + u


def rwm_step(positions, log_target, step_size, box, rng, current_logp=None):
    """One reflected Gaussian random-walk Metropolis move per particle.

    Parameters
    ----------
    positions : ndarray, shape (N, d)
    log_target : callable
        Vectorized log-density (up to a constant).
    step_size : float or ndarray
        Proposal standard deviation, per dimension if an array.
    box : tuple of ndarray
        ``(lower, upper)`` bounds.
    current_logp : ndarray, optional
        Cached ``log_target(positions)``.

    Returns
    -------
    positions, logp, accept : ndarray
    """
    lower, upper = (np.asarray(b, dtype=float) for b in box)
    x = np.asarray(positions, dtype=float)
    logp = log_target(x) if current_logp is None else current_logp
    prop = reflect(x + step_size * rng.standard_normal(x.shape), lower, upper)
    logq = log_target(prop)
    log_u = np.log(rng.uniform(size=len(x)))
    with np.errstate(invalid="ignore"):
        accept = log_u < (logq - logp)
    accept |= np.isinf(logp) & (logp < 0) & np.isfinite(logq)
    x = np.where(accept[:, None], prop, x)
    logp = np.where(accept, logq, logp)
    return x, logp, accept


def _bisect_increment(log_w, logp, temperature, target, tol, n, max_iter=60):
    """Largest step ``delta`` with ``ESS(log_w + delta logp) ~= target``."""
    remaining = 1.0 - temperature
    if ess(log_w + remaining * logp) >= target - tol * n:
        return remaining
    lo, hi = 0.0, remaining
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        e = ess(log_w + mid * logp)
        if abs(e - target) <= tol * n:
            return mid
        if e > target:
            lo = mid
        else:
            hi = mid
    return lo if lo > 0 else hi


def run_smc(log_unnorm, box, cfg=None, rng=None):
    """Particle approximation of the density proportional to ``exp(log_unnorm)``.

    Parameters
    ----------
    log_unnorm : callable
        Vectorized log unnormalized density on ``(N, d)`` arrays.
    box : tuple
        ``(lower, upper)`` arrays of length ``d``.
    cfg : SmcConfig
    rng : numpy.random.Generator

    Returns
    -------
    ParticleSet
        Terminal temperature is always 1. ``forced_final`` is set when the
        level budget ran out and a final reweight to temperature 1 was forced.
    """
    cfg = SmcConfig() if cfg is None else cfg
    rng = np.random.default_rng() if rng is None else rng
    lower, upper = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    if np.any(upper <= lower):
        raise ValueError("box must satisfy lower < upper in every dimension")
    N, d = cfg.n_particles, len(lower)

    x = lower + (upper - lower) * rng.uniform(size=(N, d))
    logp = np.asarray(log_unnorm(x), dtype=float)
    if not np.any(np.isfinite(logp)):
        raise DegenerateTargetError("log density is -inf at every particle")
    log_w = np.zeros(N)
    temperature = 0.0
    temps, accs = [0.0], []
    step = cfg.rwm_step_size * (upper - lower)
    target = cfg.ess_ratio * N
    forced = False

    for level in range(cfg.max_temp_levels):
        if temperature >= 1.0:
            break
        finite = np.isfinite(logp)
        safe = np.where(finite, logp, 0.0)
        delta = _bisect_increment(
            np.where(finite, log_w, -np.inf), safe, temperature, target,
            cfg.bisection_tol, N,
        )
        if level == cfg.max_temp_levels - 1 and temperature + delta < 1.0 - 1e-12:
            forced = True
            warnings.warn("SMC level budget exhausted; forcing temperature 1")
            delta = 1.0 - temperature
        new_temp = 1.0 if temperature + delta >= 1.0 - 1e-12 else temperature + delta
        log_w = np.where(finite, log_w + (new_temp - temperature) * safe, -np.inf)
        temperature = new_temp
        temps.append(temperature)
        if ess(log_w) < (cfg.ess_ratio + cfg.bisection_tol) * N:
            idx = systematic_resample(normalized_weights(log_w), N, rng)
            x, logp = x[idx], logp[idx]
            log_w = np.zeros(N)

        def tempered(z, t=temperature):
            return t * np.asarray(log_unnorm(z), dtype=float)

        tlogp = temperature * logp
        level_acc = []
        for _ in range(cfg.rwm_steps):
            x, tlogp, acc = rwm_step(x, tempered, step, (lower, upper), rng, tlogp)
            level_acc.append(acc.mean())
        logp = tlogp / temperature
        accs.append(float(np.mean(level_acc)))
        if accs[-1] < 0.1:
            step = 0.5 * step

    return ParticleSet(x, log_w, temperature, tuple(temps), forced, tuple(accs))
