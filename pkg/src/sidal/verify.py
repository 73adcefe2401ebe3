"""Fast self-checks behind ``sidal verify``.

Each check returns ``(passed, detail)``. They are small versions of the test
suite's oracles, meant to run in well under a minute.
"""

import time

import numpy as np

from . import acquisition, benchmarks, campaign, gp, kernels, sid, smc
from .benchmarks import Domain


def _random_posterior(rng, n, d=2, kernel=None):
    kernel = kernel or kernels.KernelSpec("matern52", (0.3,) * d)
    X = rng.uniform(size=(n, d))
    y = np.sin(3 * X).sum(axis=1) + 0.1 * rng.standard_normal(n)
    return gp.fit(kernel, gp.Dataset.from_arrays(X, y, 1e-4))


def check_kernels():
    rng = np.random.default_rng(0)
    worst = 0.0
    for fam in ("se", "matern52", "matern32"):
        k = kernels.KernelSpec(fam, (0.4, 0.7))
        X = rng.uniform(size=(20, 2))
        K = kernels.cross(k, X, X)
        worst = max(worst, np.abs(K - K.T).max())
        if np.linalg.eigvalsh(kernels.gram(k, X)).min() < -1e-10:
            return False, f"{fam} Gram not PSD"
    B = rng.uniform(size=(20, 64)) < 0.2
    T = kernels.gram(kernels.KernelSpec("tanimoto"), B)
    if np.linalg.eigvalsh(T).min() < -1e-10:
        return False, "tanimoto Gram not PSD"
    return worst < 1e-12, f"max asymmetry {worst:.1e}"


def check_gp_dense():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        post = _random_posterior(rng, rng.integers(1, 21))
        d = post.data
        Xq = rng.uniform(size=(5, 2))
        A = kernels.gram(post.kernel, d.X) + (d.noise_var + post.jitter) * np.eye(d.n)
        Kq = kernels.cross(post.kernel, d.X, Xq)
        m = d.y_mean + d.y_std * Kq.T @ np.linalg.solve(A, d.standardized())
        C = d.y_std**2 * (kernels.cross(post.kernel, Xq, Xq) - Kq.T @ np.linalg.solve(A, Kq))
        mm, vv = gp.predict(post, Xq)
        worst = max(worst, np.abs(mm - m).max(), np.abs(vv - np.diag(C)).max())
    return worst < 1e-8, f"max abs error {worst:.1e}"


def check_fantasy():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        post = _random_posterior(rng, rng.integers(1, 15))
        xs, xq = rng.uniform(size=(2, 2))
        d = post.data
        dd = gp.Dataset(np.vstack([d.X, xq]), np.append(d.y, 0.0), d.noise_var,
                        d.y_mean, d.y_std)
        ref = gp.mean_var(gp.fit(post.kernel, dd), xs)[1]
        worst = max(worst, abs(gp.fantasy_var(post, xs, xq) - ref))
    return worst < 1e-8, f"max abs error {worst:.1e}"


def check_mgf():
    rng = np.random.default_rng(3)
    post = _random_posterior(rng, 6)
    X = rng.uniform(size=(20, 2))
    mu, var = gp.predict(post, X)
    bad = 0
    for lam in (-2.0, -0.5, 0.5, 2.0):
        spec = sid.BoltzmannSpec(lam)
        closed = np.exp(sid.build_absid(post, spec)(X))
        draws = mu + np.sqrt(var) * rng.standard_normal((100_000, len(X)))
        e = np.exp(lam * draws)
        se = e.std(axis=0) / np.sqrt(len(e))
        bad += int(np.sum(np.abs(e.mean(axis=0) - closed) > 3 * se + 1e-15))
    return bad <= 2, f"{bad}/80 points outside 3 standard errors"


def check_density_ratio():
    rng = np.random.default_rng(4)
    grid = np.linspace(0, 1, 50)[:, None]
    K = kernels.gram(kernels.KernelSpec("se", (0.2,)), grid)
    L = np.linalg.cholesky(K + 1e-8 * np.eye(50))
    slack = np.inf
    for _ in range(100):
        v1, v2 = L @ rng.standard_normal(50), L @ rng.standard_normal(50)
        for lam in (-2.0, -0.5, 0.5, 2.0):
            rep = sid.log_density_ratio_check(
                lambda X, v=v1: v, lambda X, v=v2: v, sid.BoltzmannSpec(lam), grid
            )
            slack = min(slack, rep["min_slack"])
    return True, f"min slack {slack:.3e}"


def check_smc():
    cfg = smc.SmcConfig(n_particles=4000)
    ps = smc.run_smc(lambda x: -0.5 * x[:, 0] ** 2, ([-6.0], [6.0]), cfg,
                     np.random.default_rng(5))
    m = ps.weights @ ps.positions[:, 0]
    m2 = ps.weights @ ps.positions[:, 0] ** 2
    return abs(m) < 0.05 and abs(m2 - 1) < 0.1, f"mean {m:.3f}, E[x^2] {m2:.3f}"


def check_resampling():
    for s in range(100):
        idx = smc.systematic_resample([0.75, 0.25], 4, np.random.default_rng(s))
        if np.bincount(idx, minlength=2).tolist() != [3, 1]:
            return False, f"seed {s}: counts {np.bincount(idx).tolist()}"
    return True, "counts (3, 1) for 100 seeds"


def check_discrete_selection():
    rng = np.random.default_rng(6)
    pool = rng.uniform(size=(30, 2))
    domain = Domain.from_pool(pool)
    spec = sid.BoltzmannSpec(1.0)
    for _ in range(10):
        post = _random_posterior(rng, rng.integers(1, 8))
        res = acquisition.select_absid(post, spec, domain,
                                       acquisition.AcquisitionSpec("absid"), rng)
        w = sid.normalize_discrete(sid.build_absid(post, spec), pool)
        var = gp.predict(post, pool)[1]
        thr = w @ var
        best, best_i = np.inf, None
        for i in range(len(pool)):
            if var[i] < thr:
                continue
            v = sum(w[j] * gp.fantasy_var(post, pool[j], pool[i]) for j in range(len(pool)))
            if v < best:
                best, best_i = v, i
        if best_i != res.index:
            return False, f"selected {res.index}, brute force {best_i}"
    return True, "10 posteriors"


def check_metrics():
    bench = benchmarks.get_benchmark("forrester")
    spec = sid.BoltzmannSpec(1.0)
    e0 = campaign.weighted_mse(bench.oracle, bench, spec)
    e1 = campaign.weighted_mse(lambda X: bench.oracle(X) + 0.5, bench, spec)
    r = campaign.r2_topk(bench.oracle, bench, spec, 10)
    ok = e0 == 0 and abs(e1 - 0.25) < 1e-12 and r == 1.0
    return ok, f"wmse(f)={e0}, wmse(f+0.5)={e1:.15f}, r2={r}"


def check_campaign_diagnostics():
    cfg = campaign.CampaignConfig(benchmark="branin", method="rs", budget=20, seed=0)
    c = campaign.Campaign(cfg).run()
    rep = campaign.diagnostics_suite(c.records, c.posterior, c.bench, c.spec)
    failed = [name for name, ok, _ in rep["checks"] if not ok]
    return rep["passed"], "all passed" if not failed else ", ".join(failed)


CHECKS = [
    ("kernel symmetry / PSD", check_kernels),
    ("GP vs dense solve", check_gp_dense),
    ("fantasy variance vs refit", check_fantasy),
    ("AB-SID vs MGF Monte Carlo", check_mgf),
    ("log-density ratio bound", check_density_ratio),
    ("SMC standard-normal moments", check_smc),
    ("systematic resampling", check_resampling),
    ("discrete selection vs brute force", check_discrete_selection),
    ("metric identities", check_metrics),
    ("campaign diagnostics", check_campaign_diagnostics),
]


def run_checks(out=print):
    all_ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as err:  # a crash is a failed check
            ok, detail = False, f"{type(err).__name__}: {err}"
        all_ok &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name:<36} {detail}  "
            f"({time.perf_counter() - t0:.1f}s)")
    return all_ok
