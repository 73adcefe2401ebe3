"""Query selection: surrogate-weighted integrated variance reduction and baselines.

Discrete domains use the exact surrogate weights over the pool. Continuous
domains use SMC particles drawn from the surrogate both as the reference set
of the integral and as the candidate set of the minimization.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import gp, sid, smc

METHODS = ("absid", "tssid", "rs", "us", "imse", "ghal")

_METHOD_ALIASES = {
    "absid": "absid", "ab-sid-ivar": "absid", "absidivar": "absid", "ab": "absid",
    "tssid": "tssid", "ts-sid-ivar": "tssid", "tssidivar": "tssid", "ts": "tssid",
    "rs": "rs", "random": "rs",
    "us": "us", "uncertainty": "us",
    "imse": "imse",
    "ghal": "ghal",
}


def canonical_method(name):
    key = str(name).lower().replace("_", "-")
    if key not in _METHOD_ALIASES:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return _METHOD_ALIASES[key]


@dataclass(frozen=True)
class GhalParams:
    tau_range: tuple = (0.0, 3.0)
    eta_range: tuple = (1.0, 5.0)
    max_chain_steps: int = 500
    step_size: float = 0.1


@dataclass(frozen=True)
class AcquisitionSpec:
    method: str = "absid"
    use_constraint: bool = True
    first_order: bool = False
    ghal: GhalParams = None
    mc_threshold_samples: int = None
    n_features: int = 2048
    smc_config: smc.SmcConfig = None

    def __post_init__(self):
        m = canonical_method(self.method)
        object.__setattr__(self, "method", m)
        if m == "ghal" and self.ghal is None:
            object.__setattr__(self, "ghal", GhalParams())
        if m != "ghal" and self.ghal is not None:
            raise ValueError("ghal parameters only apply to the ghal method")
        if self.mc_threshold_samples is not None and self.mc_threshold_samples < 1:
            raise ValueError("mc_threshold_samples must be at least 1")


@dataclass
class AcquisitionResult:
    x_chosen: np.ndarray
    objective_value: float = float("nan")
    threshold: float = float("nan")
    feasible_count: int = 0
    fallback_used: bool = False
    index: int = None
    var_chosen: float = float("nan")
    timings: dict = field(default_factory=dict)


def ivar_objectives(post, candidates, ref_points, ref_weights, cov=None,
                    var_ref=None, var_cand=None):
    """Weighted look-ahead variance ``sum_j w_j var(ref_j | x = cand)`` per candidate.

    ``cov`` optionally gives the raw posterior covariance between reference
    points (rows) and candidates (columns).
    """
    w = np.asarray(ref_weights, dtype=float)
    if var_ref is None:
        var_ref = gp.predict(post, ref_points)[1]
    if var_cand is None:
        var_cand = gp.predict(post, candidates)[1]
    if cov is None:
        cov = gp.posterior_cov_matrix(post, ref_points, candidates)
    noise = post.noise_var * post.data.y_std**2
    F = np.maximum(var_ref[:, None] - cov**2 / (var_cand[None, :] + noise), 0.0)
    return w @ F


def ivar_objective(post, x_cand, ref_points, ref_weights):
    return float(
        ivar_objectives(post, np.atleast_2d(x_cand), ref_points, ref_weights)[0]
    )


def estimate_threshold(dens, post, domain, M=None, rng=None, particles=None,
                       weights=None):
    """Surrogate-weighted mean posterior variance ``E_p[sigma^2]``.

    Finite pools use exact normalized weights (``M`` is ignored). Boxes use
    ``M`` systematic-resampled draws from ``particles`` (an SMC run targeting
    ``dens`` is started when none is given).
    """
    if domain.discrete:
        p = sid.normalize_discrete(dens, domain.pool) if weights is None else weights
        return float(p @ gp.predict(post, domain.pool)[1])
    rng = np.random.default_rng() if rng is None else rng
    if particles is None:
        particles = smc.run_smc(dens, domain.bounds, rng=rng)
    M = particles.n if M is None else M
    idx = smc.systematic_resample(particles.weights, M, rng)
    return float(np.mean(gp.predict(post, particles.positions[idx])[1]))


def _first_occurrence_unique(X, weights):
    """Unique rows in order of first appearance, with summed weights."""
    _, first, inverse = np.unique(X, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    w = np.bincount(rank[inverse], weights=weights, minlength=len(first))
    return X[np.sort(first)], w


def _constrained_argmin(post, ref, w, cand_pool, var_cand, threshold, use_constraint,
                        cov_fn):
    if use_constraint:
        feasible = np.flatnonzero(var_cand >= threshold)
    else:
        feasible = np.arange(len(cand_pool))
    if len(feasible) == 0:
        i = int(np.argmax(var_cand))
        return i, float("nan"), 0, True
    obj = ivar_objectives(
        post, cand_pool[feasible], ref, w, cov=cov_fn(feasible),
        var_cand=var_cand[feasible],
    )
    j = int(np.argmin(obj))
    return int(feasible[j]), float(obj[j]), len(feasible), False


def _surrogate(post, spec, domain, acq, rng, path_rng):
    if acq.method == "absid":
        if acq.first_order and domain.discrete:
            return sid.build_absid(post, spec, True, domain.pool,
                                   domain.pool_gram(post.kernel))
        return sid.build_absid(post, spec)
    if domain.discrete:
        values = gp.sample_path_discrete(
            post, domain.pool, path_rng, prior=domain.pool_gram(post.kernel)
        )
        return sid.build_tssid(sid.PoolPath(domain.pool, values), spec)
    path = gp.sample_path_continuous(post, acq.n_features, path_rng)
    return sid.build_tssid(path, spec)


def select_sid(post, spec, domain, acq, rng, path_rng=None):
    """SID-weighted iVAR query restricted to the high-variance potential set.

    Parameters
    ----------
    post : gp.GpPosterior
    spec : sid.BoltzmannSpec
    domain : benchmarks.Domain
    acq : AcquisitionSpec
        ``method`` selects the AB or TS surrogate.
    rng : numpy.random.Generator
        Drives SMC and threshold resampling.
    path_rng : numpy.random.Generator, optional
        Drives the Thompson path draw (defaults to ``rng``).
    """
    path_rng = rng if path_rng is None else path_rng
    t0 = time.perf_counter()
    dens = _surrogate(post, spec, domain, acq, rng, path_rng)
    t1 = time.perf_counter()

    if domain.discrete:
        pool = domain.pool
        gram = domain.pool_gram(post.kernel)
        if acq.method == "absid" and acq.first_order:
            w = sid.expected_density(post, spec, pool, True, gram)
            w = np.maximum(w, 0.0)
            w = w / w.sum()
        else:
            w = sid.normalize_discrete(dens, pool)
        var = gp.predict(post, pool)[1]
        threshold = float(w @ var)
        ref, cand_pool, var_cand = pool, pool, var

        def cov_fn(idx):
            return gp.posterior_cov_matrix(post, pool, pool[idx], prior=gram[:, idx])
    else:
        cfg = acq.smc_config or smc.SmcConfig.for_dim(domain.dim)
        particles = smc.run_smc(dens, domain.bounds, cfg, rng)
        threshold = estimate_threshold(
            dens, post, domain, acq.mc_threshold_samples, rng, particles
        )
        ref, w = _first_occurrence_unique(particles.positions, particles.weights)
        cand_pool = ref
        var_cand = gp.predict(post, cand_pool)[1]

        def cov_fn(idx):
            return gp.posterior_cov_matrix(post, ref, cand_pool[idx])
    t2 = time.perf_counter()

    i, obj, n_feas, fallback = _constrained_argmin(
        post, ref, w, cand_pool, var_cand, threshold, acq.use_constraint, cov_fn
    )
    t3 = time.perf_counter()
    x = cand_pool[i]
    if not fallback and acq.use_constraint:
        assert var_cand[i] >= threshold
    return AcquisitionResult(
        x, obj, threshold, n_feas, fallback,
        index=i if domain.discrete else None,
        var_chosen=float(var_cand[i]),
        timings={"surrogate": t1 - t0, "reference": t2 - t1, "optimize": t3 - t2},
    )


def select_absid(post, spec, domain, acq=None, rng=None):
    acq = AcquisitionSpec("absid") if acq is None else acq
    rng = np.random.default_rng() if rng is None else rng
    return select_sid(post, spec, domain, acq, rng)


def select_tssid(post, spec, domain, acq=None, rng=None, path_rng=None):
    acq = AcquisitionSpec("tssid") if acq is None else acq
    rng = np.random.default_rng() if rng is None else rng
    return select_sid(post, spec, domain, acq, rng, path_rng)


def uniform_reference(domain, rng, per_dim=1000):
    """``per_dim * d`` uniform points in a box."""
    return domain.uniform(per_dim * domain.dim, rng)


def select_rs(post, domain, rng):
    if domain.discrete:
        i = int(rng.integers(len(domain.pool)))
        x = domain.pool[i]
    else:
        i, x = None, domain.uniform(1, rng)[0]
    return AcquisitionResult(x, index=i, var_chosen=gp.mean_var(post, x)[1])


def select_us(post, domain, rng, candidates=None):
    """Maximum posterior variance over the pool or a uniform candidate set."""
    if domain.discrete:
        X = domain.pool
    else:
        X = uniform_reference(domain, rng) if candidates is None else candidates
    var = gp.predict(post, X)[1]
    i = int(np.argmax(var))
    return AcquisitionResult(
        X[i], objective_value=float(var[i]), feasible_count=len(X),
        index=i if domain.discrete else None, var_chosen=float(var[i]),
    )


def select_imse(post, domain, rng, reference=None):
    """Unconstrained iVAR with uniform reference weights."""
    if domain.discrete:
        X = domain.pool
        gram = domain.pool_gram(post.kernel)
        cov = gp.posterior_cov_matrix(post, X, X, prior=gram)
    else:
        X = uniform_reference(domain, rng) if reference is None else reference
        cov = gp.posterior_cov_matrix(post, X, X)
    var = np.clip(np.diag(cov).copy(), 0.0, None)
    w = np.full(len(X), 1.0 / len(X))
    obj = ivar_objectives(post, X, X, w, cov=cov, var_ref=var, var_cand=var)
    i = int(np.argmin(obj))
    return AcquisitionResult(
        X[i], objective_value=float(obj[i]), feasible_count=len(X),
        index=i if domain.discrete else None, var_chosen=float(var[i]),
    )


def draw_ghal_hyperparameters(params, rng):
    """Per-campaign ``(tau_explore, eta)`` drawn uniformly from their ranges."""
    tau = rng.uniform(*params.tau_range)
    eta = rng.uniform(*params.eta_range)
    return float(tau), float(eta)


def select_ghal(post, spec, domain, acq, rng, tau_explore, eta, reference=None):
    """Single-chain heuristic: walk on the tilted surrogate until variance is high.

    The variance threshold is ``eta`` times the mean posterior variance over a
    uniform reference set. The chain starts at the training input with the
    lowest posterior mean.
    """
    if domain.discrete:
        raise ValueError("ghal runs on continuous domains only")
    params = acq.ghal or GhalParams()
    ref = uniform_reference(domain, rng) if reference is None else reference
    eta_eff = eta * float(np.mean(gp.predict(post, ref)[1]))
    dens = sid.build_ghal_tilt(post, spec, tau_explore)
    if post.n:
        mu = gp.predict(post, post.data.X)[0]
        x = post.data.X[[int(np.argmin(mu))]].astype(float)
    else:
        x = 0.5 * (domain.lower + domain.upper)[None, :]
    step = params.step_size * (domain.upper - domain.lower)
    logp = dens(x)
    best_x, best_var = None, -np.inf
    for _ in range(params.max_chain_steps):
        x, logp, _ = smc.rwm_step(x, dens, step, domain.bounds, rng, logp)
        v = gp.predict(post, x)[1][0]
        if v > eta_eff:
            return AcquisitionResult(x[0], threshold=eta_eff, feasible_count=1,
                                     var_chosen=float(v))
        if v > best_var:
            best_x, best_var = x[0].copy(), v
    return AcquisitionResult(best_x, threshold=eta_eff, fallback_used=True,
                             var_chosen=float(best_var))
