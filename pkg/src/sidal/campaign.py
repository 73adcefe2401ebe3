"""Active-learning campaigns: the fit / select / observe loop and its metrics."""

import csv
import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import acquisition, benchmarks, gp, kernels, sid, smc

log = logging.getLogger(__name__)

STREAMS = ("init", "noise", "smc", "ts", "ghal", "acq")


def stream(seed, name):
    """Independent generator for a named substream of one campaign seed."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to reproduce one campaign.

    ``lam=None`` and the ``None`` kernel/SMC fields resolve to per-benchmark
    defaults in :func:`resolve`.
    """

    benchmark: str = "forrester"
    method: str = "absid"
    lam: float = None
    bias: str = "const:0"
    budget: int = 40
    seed: int = 0
    noise_var: float = 1e-4
    n_init: int = 1
    domain: str = "box"
    dim: int = 2
    pool_size: int = 2000
    bits: int = 2048
    bench_seed: int = 0
    kernel_family: str = None
    kernel_lengthscales: tuple = None
    kernel_output_scale: float = 1.0
    hyper: str = "fixed"
    use_constraint: bool = True
    first_order: bool = False
    mc_samples: int = None
    n_features: int = 2048
    smc_particles: int = None
    smc_ess_ratio: float = 0.5
    smc_rwm_steps: int = 10
    smc_step_size: float = 0.1
    smc_max_levels: int = 10
    ghal_max_steps: int = 500
    diagnostics: bool = False

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if self.lam is not None and (self.lam == 0 or not np.isfinite(self.lam)):
            raise ValueError("lambda must be a finite nonzero real")
        if self.n_init < 1:
            raise ValueError("n_init must be at least 1")
        if self.domain not in ("box", "pool"):
            raise ValueError("domain must be 'box' or 'pool'")
        if self.hyper not in ("fixed", "grid"):
            raise ValueError("hyper must be 'fixed' or 'grid'")
        object.__setattr__(self, "method", acquisition.canonical_method(self.method))
        if self.kernel_lengthscales is not None:
            object.__setattr__(
                self, "kernel_lengthscales",
                tuple(float(v) for v in np.atleast_1d(self.kernel_lengthscales)),
            )


@dataclass
class CampaignRecord:
    t: int
    x: np.ndarray
    y: float
    weighted_mse: float
    threshold: float
    feasible_count: int
    fallback_used: bool
    sigma_max: float
    info_gain: float
    cum_var_sum: float
    var_chosen: float = float("nan")
    index: int = None
    wall_times: dict = field(default_factory=dict)


def load_benchmark(cfg):
    name = cfg.benchmark.lower()
    if name == "fingerprint":
        return benchmarks.get_benchmark(
            name, seed=cfg.bench_seed, pool_size=cfg.pool_size, bits=cfg.bits
        )
    return benchmarks.get_benchmark(
        name, discrete=cfg.domain == "pool", dim=cfg.dim, seed=cfg.bench_seed
    )


def parse_bias(text, dim, bit_vectors=False):
    """``const:c`` or ``gp:seed:scale`` (bounded random-feature prior draw)."""
    parts = str(text).split(":")
    if parts[0] in ("const", "constant"):
        return sid.ConstantBias(float(parts[1]) if len(parts) > 1 else 0.0)
    if parts[0] == "gp" and not bit_vectors:
        seed = int(parts[1]) if len(parts) > 1 else 0
        scale = float(parts[2]) if len(parts) > 2 else 1.0
        kern = kernels.KernelSpec("matern52", (0.2,) * dim)
        return sid.GpPriorBias(kern, dim, scale, seed)
    raise ValueError(f"unknown bias {text!r}")


def resolve(cfg, bench=None):
    """Benchmark, Boltzmann spec, kernel and acquisition spec for a config."""
    bench = load_benchmark(cfg) if bench is None else bench
    lam = bench.default_lambda if cfg.lam is None else cfg.lam
    bias = parse_bias(cfg.bias, bench.dim, bench.name == "fingerprint")
    spec = sid.BoltzmannSpec(lam, bias)
    kern = bench.default_kernel
    if cfg.kernel_family is not None or cfg.kernel_lengthscales is not None:
        kern = kernels.KernelSpec(
            cfg.kernel_family or kern.family,
            cfg.kernel_lengthscales or kern.lengthscales,
            cfg.kernel_output_scale,
        )
    elif cfg.kernel_output_scale != kern.output_scale:
        kern = kernels.KernelSpec(kern.family, kern.lengthscales, cfg.kernel_output_scale)
    n_part = cfg.smc_particles or 1000 * bench.domain.dim
    smc_cfg = smc.SmcConfig(
        n_part, cfg.smc_ess_ratio, cfg.smc_rwm_steps, cfg.smc_step_size,
        cfg.smc_max_levels,
    )
    ghal = (
        acquisition.GhalParams(max_chain_steps=cfg.ghal_max_steps)
        if cfg.method == "ghal" else None
    )
    acq = acquisition.AcquisitionSpec(
        cfg.method, cfg.use_constraint, cfg.first_order, ghal, cfg.mc_samples,
        cfg.n_features, smc_cfg,
    )
    return bench, spec, kern, acq


def weighted_mse(mean_fn, bench, spec):
    """``sum_x P_f(x) (mu(x) - f(x))^2`` over the benchmark's evaluation grid."""
    p = benchmarks.true_weighted_density(bench, spec)
    err = np.asarray(mean_fn(bench.eval_grid), dtype=float) - bench.eval_f
    return float(p @ err**2)


def r2_topk(mean_fn, bench, spec, k_percent):
    """R^2 on the top ``k_percent`` of grid points ranked by Boltzmann weight."""
    if not 0 < k_percent <= 100:
        raise ValueError("k_percent must lie in (0, 100]")
    logw = spec.lam * bench.eval_f + spec.b(bench.eval_grid)
    n = len(logw)
    m = int(np.ceil(k_percent / 100.0 * n - 1e-9))
    if m < 2:
        raise ValueError("top-k subset has fewer than two points")
    top = np.argsort(-logw, kind="stable")[:m]
    y = bench.eval_f[top]
    yhat = np.asarray(mean_fn(bench.eval_grid[top]), dtype=float)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise ValueError("top-k subset has zero variance")
    return float(1.0 - np.sum((y - yhat) ** 2) / ss_tot)


class Campaign:
    """One seeded run of the active-learning loop.

    After :meth:`run`, ``records`` holds one row per iteration and
    ``posterior`` the final GP.
    """

    def __init__(self, cfg, bench=None):
        self.cfg = cfg
        self.bench, self.spec, self.kernel, self.acq = resolve(cfg, bench)
        self.records = []
        self.posterior = None
        self.ghal_hyper = None

    def _observe(self, X, rng):
        f = np.asarray(self.bench.oracle(X), dtype=float)
        return f + rng.normal(0.0, np.sqrt(self.cfg.noise_var), size=f.shape)

    def _fit(self, data):
        kern = self.kernel
        if self.cfg.hyper == "grid":
            kern = gp.select_lengthscales(self.kernel, data)
        return gp.fit(kern, data)

    def _select(self, post, rngs, reference):
        method, domain = self.acq.method, self.bench.domain
        if method in ("absid", "tssid"):
            return acquisition.select_sid(
                post, self.spec, domain, self.acq, rngs["smc"], rngs["ts"]
            )
        if method == "rs":
            return acquisition.select_rs(post, domain, rngs["acq"])
        if method == "us":
            return acquisition.select_us(post, domain, rngs["acq"], reference)
        if method == "imse":
            return acquisition.select_imse(post, domain, rngs["acq"], reference)
        tau, eta = self.ghal_hyper
        return acquisition.select_ghal(
            post, self.spec, domain, self.acq, rngs["ghal"], tau, eta, reference
        )

    def run(self):
        cfg, bench, domain = self.cfg, self.bench, self.bench.domain
        rngs = {name: stream(cfg.seed, name) for name in STREAMS}
        if domain.discrete:
            idx = rngs["init"].choice(len(domain.pool), cfg.n_init, replace=False)
            X0 = domain.pool[idx]
        else:
            X0 = domain.uniform(cfg.n_init, rngs["init"])
        reference = None
        if not domain.discrete and self.acq.method in ("us", "imse", "ghal"):
            reference = acquisition.uniform_reference(domain, rngs["acq"])
        if self.acq.method == "ghal":
            self.ghal_hyper = acquisition.draw_ghal_hyperparameters(
                self.acq.ghal, rngs["ghal"]
            )

        prior = gp.fit(self.kernel, gp.Dataset.from_arrays(None, [], cfg.noise_var,
                                                           dim=domain.dim))
        cum_var = float(np.sum(gp.predict(prior, X0, raw=False)[1]))
        data = gp.Dataset.from_arrays(X0, self._observe(X0, rngs["noise"]),
                                      cfg.noise_var)
        post = self._fit(data)
        self.records = []
        for t in range(1, cfg.budget + 1):
            t0 = time.perf_counter()
            sigma_max = float(np.max(gp.predict(post, bench.eval_grid)[1]))
            res = self._select(post, rngs, reference)
            t1 = time.perf_counter()
            x = np.asarray(res.x_chosen)
            cum_var += float(gp.predict(post, x, raw=False)[1][0])
            y = float(self._observe(x[None, :], rngs["noise"])[0])
            data = data.append(x, y)
            post = self._fit(data)
            t2 = time.perf_counter()
            mse = weighted_mse(lambda X: gp.predict(post, X)[0], bench, self.spec)
            ig = gp.information_gain(post)
            t3 = time.perf_counter()
            rec = CampaignRecord(
                t, x, y, mse, res.threshold, res.feasible_count, res.fallback_used,
                sigma_max, ig, cum_var, res.var_chosen, res.index,
                {"select": t1 - t0, "fit": t2 - t1, "metric": t3 - t2,
                 **{f"acq_{k}": v for k, v in res.timings.items()}},
            )
            self.records.append(rec)
            log.debug("t=%d wmse=%.4g fallback=%s", t, mse, res.fallback_used)
        self.posterior = post
        return self


def run_campaign(cfg):
    """Run one campaign and return its per-iteration records."""
    return Campaign(cfg).run().records


def c1_constant(noise_var):
    return 2.0 / np.log1p(1.0 / noise_var)


# -- output --------------------------------------------------------------------

def csv_header(bench):
    xcols = ["x_index"] if bench.name == "fingerprint" else [
        f"x{i}" for i in range(bench.dim)
    ]
    return (
        ["seed", "benchmark", "method", "lambda", "t"] + xcols
        + ["y", "wmse", "threshold", "feasible_count", "fallback", "sigma_max",
           "info_gain", "cum_var"]
    )


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def record_rows(records, cfg, bench, spec):
    for r in records:
        xs = [r.index] if bench.name == "fingerprint" else list(np.ravel(r.x))
        yield [str(cfg.seed), bench.name, cfg.method, _fmt(spec.lam), str(r.t)] + [
            _fmt(v) for v in xs
        ] + [
            _fmt(r.y), _fmt(r.weighted_mse), _fmt(r.threshold),
            str(r.feasible_count), _fmt(r.fallback_used), _fmt(r.sigma_max),
            _fmt(r.info_gain), _fmt(r.cum_var_sum),
        ]


def _open_new(path):
    return open(path, "x", newline="")


def write_records_csv(campaign, path):
    """Write the deterministic record table; wall times go to a sidecar file.

    Refuses to overwrite existing files.
    """
    with _open_new(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(campaign.bench))
        w.writerows(record_rows(campaign.records, campaign.cfg, campaign.bench,
                                campaign.spec))
    timing_path = str(path)[:-4] + ".timings.csv" if str(path).endswith(".csv") \
        else str(path) + ".timings.csv"
    keys = sorted({k for r in campaign.records for k in r.wall_times})
    with _open_new(timing_path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + keys)
        for r in campaign.records:
            w.writerow([r.t] + [f"{r.wall_times.get(k, float('nan')):.6f}" for k in keys])
    return path


# -- replications ----------------------------------------------------------------

def _run_seed(cfg):
    return Campaign(cfg).run()


def summarize(wmse_by_seed):
    """Per-iteration median and interquartile range across seeds.

    ``wmse_by_seed`` maps seed to a sequence of per-iteration values.
    """
    seeds = sorted(wmse_by_seed)
    M = np.array([wmse_by_seed[s] for s in seeds], dtype=float)
    q25, med, q75 = np.percentile(M, [25, 50, 75], axis=0)
    return {
        "seeds": seeds,
        "t": list(range(1, M.shape[1] + 1)),
        "median": med.tolist(),
        "q25": q25.tolist(),
        "q75": q75.tolist(),
    }


def run_replications(cfg, seeds, jobs=1):
    """Run one campaign per seed and aggregate weighted MSE.

    Returns
    -------
    campaigns : dict
        seed -> finished :class:`Campaign`.
    summary : dict
        Output of :func:`summarize`.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    cfgs = [replace(cfg, seed=s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            done = list(ex.map(_run_seed, cfgs))
    else:
        done = [_run_seed(c) for c in cfgs]
    campaigns = dict(zip(seeds, done))
    summary = summarize(
        {s: [r.weighted_mse for r in c.records] for s, c in campaigns.items()}
    )
    return campaigns, summary


def write_summary(summary, csv_path, json_path=None, meta=None):
    with _open_new(csv_path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "median_wmse", "q25_wmse", "q75_wmse"])
        for row in zip(summary["t"], summary["median"], summary["q25"], summary["q75"]):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    if json_path is not None:
        with _open_new(json_path) as fh:
            json.dump({**summary, "meta": meta or {}}, fh, indent=2)


# -- diagnostics -----------------------------------------------------------------

def diagnostics_suite(records, post, bench=None, spec=None, grid_size=200, tol=1e-9):
    """Check the provable invariants on a finished campaign.

    Returns a dict ``{"passed": bool, "checks": [(name, passed, detail), ...]}``.
    Checks: cumulative variance against the information-gain bound,
    non-decreasing information gain, posterior-variance monotonicity along the
    data sequence, and the log-density ratio bound between the final mean and
    the oracle.
    """
    checks = []
    if not records:
        return {"passed": True, "checks": [("empty campaign", True, "vacuous")]}
    c1 = c1_constant(post.noise_var)
    worst = max(r.cum_var_sum - c1 * r.info_gain for r in records)
    checks.append(("info-gain bound", worst <= tol, f"max excess {worst:.3e}"))
    ig = np.array([r.info_gain for r in records])
    mono_ig = bool(np.all(np.diff(ig) >= -1e-9))
    checks.append(("info gain non-decreasing", mono_ig, ""))

    if bench is not None:
        rng = np.random.default_rng(0)
        G = bench.eval_grid
        if len(G) > grid_size:
            G = G[np.sort(rng.choice(len(G), grid_size, replace=False))]
        data = post.data
        prev = None
        ok = True
        for n in range(0, data.n + 1):
            sub = gp.Dataset(data.X[:n], data.y[:n], data.noise_var)
            v = gp.predict(gp.fit(post.kernel, sub), G, raw=False)[1]
            if prev is not None and np.any(v > prev + 1e-8):
                ok = False
                break
            prev = v
        checks.append(("variance monotonicity", ok, f"{len(G)} grid points"))

    if bench is not None and spec is not None:
        try:
            rep = sid.log_density_ratio_check(
                lambda X: gp.predict(post, X)[0], bench.oracle, spec, bench.eval_grid
            )
            checks.append(("log-density ratio bound", True,
                           f"min slack {rep['min_slack']:.3e}"))
        except sid.DensityRatioViolation as err:
            checks.append(("log-density ratio bound", False, str(err)))
    return {"passed": all(c[1] for c in checks), "checks": checks}
