"""Ground-truth test functions, domains and evaluation grids.

Every continuous benchmark is exposed on the unit box ``[0, 1]^d``; the
oracle maps normalized inputs back to the function's native box before
evaluating it.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np
from scipy.stats import qmc

from . import gp, kernels, sid


class UnknownBenchmarkError(KeyError):
    pass


@dataclass
class Domain:
    """A box ``[lower, upper]`` or a finite pool of candidate points."""

    kind: str
    lower: np.ndarray = None
    upper: np.ndarray = None
    pool: np.ndarray = None
    _gram_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "box":
            self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
            self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
            if self.lower.shape != self.upper.shape or np.any(self.lower >= self.upper):
                raise ValueError("box needs lower < upper in every dimension")
        elif self.kind == "pool":
            pool = np.asarray(self.pool)
            if pool.ndim == 1:
                pool = pool[:, None]
            if len(pool) == 0:
                raise ValueError("pool must be non-empty")
            if len(np.unique(pool, axis=0)) != len(pool):
                raise ValueError("pool contains duplicate points")
            self.pool = pool
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def box(cls, lower, upper):
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def unit_box(cls, d):
        return cls.box(np.zeros(d), np.ones(d))

    @classmethod
    def from_pool(cls, pool):
        return cls("pool", pool=pool)

    @property
    def discrete(self):
        return self.kind == "pool"

    @property
    def dim(self):
        return self.pool.shape[1] if self.discrete else len(self.lower)

    @property
    def bounds(self):
        return self.lower, self.upper

    def uniform(self, n, rng):
        """``n`` uniform draws (pool indices' rows for pools)."""
        if self.discrete:
            return self.pool[rng.integers(len(self.pool), size=n)]
        return self.lower + (self.upper - self.lower) * rng.uniform(
            size=(n, self.dim)
        )

    def pool_gram(self, kernel):
        """Prior Gram matrix over the pool, cached per kernel."""
        if kernel not in self._gram_cache:
            self._gram_cache.clear()
            self._gram_cache[kernel] = kernels.gram(kernel, self.pool)
        return self._gram_cache[kernel]


@dataclass
class Benchmark:
    name: str
    dim: int
    domain: Domain
    oracle: Callable
    eval_grid: np.ndarray
    eval_f: np.ndarray
    default_lambda: float = 1.0
    default_kernel: kernels.KernelSpec = None
    grid_note: str = ""

    def __call__(self, X):
        return self.oracle(X)


def _scale_to(X, lower, upper):
    X = kernels._as_2d(np.asarray(X, dtype=float))
    return np.asarray(lower) + X * (np.asarray(upper) - np.asarray(lower))


def forrester(X):
    x = _scale_to(X, [0.0], [1.0])[:, 0]
    return (6 * x - 2) ** 2 * np.sin(12 * x - 4)


def gramacy1d(X):
    x = _scale_to(X, [0.5], [2.5])[:, 0]
    return np.sin(10 * np.pi * x) / (2 * x) + (x - 1) ** 4


def gramacy2d(X):
    Z = _scale_to(X, [-2.0, -2.0], [6.0, 6.0])
    x1, x2 = Z[:, 0], Z[:, 1]
    return x1 * np.exp(-(x1**2) - x2**2)


def branin(X):
    Z = _scale_to(X, [-5.0, 0.0], [10.0, 15.0])
    x1, x2 = Z[:, 0], Z[:, 1]
    b = 5.1 / (4 * np.pi**2)
    c = 5 / np.pi
    t = 1 / (8 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * np.cos(x1) + 10


def ishigami(X, a=7.0, b=0.1):
    Z = _scale_to(X, [-np.pi] * 3, [np.pi] * 3)
    return (
        np.sin(Z[:, 0])
        + a * np.sin(Z[:, 1]) ** 2
        + b * Z[:, 2] ** 4 * np.sin(Z[:, 0])
    )


_H_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H3_A = np.array(
    [[3.0, 10, 30], [0.1, 10, 35], [3.0, 10, 30], [0.1, 10, 35]]
)
_H3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
_H6_A = np.array(
    [
        [10, 3, 17, 3.5, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ]
)
_H6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def _hartmann(X, A, P):
    X = kernels._as_2d(np.asarray(X, dtype=float))
    inner = np.einsum("ij,nij->ni", A, (X[:, None, :] - P[None]) ** 2)
    return -np.exp(-inner) @ _H_ALPHA


hartmann3 = partial(_hartmann, A=_H3_A, P=_H3_P)
hartmann6 = partial(_hartmann, A=_H6_A, P=_H6_P)


def _eval_grid(d, seed=0):
    if d == 1:
        return np.linspace(0, 1, 1000)[:, None], "uniform grid, 1000 points"
    if d == 2:
        g = np.linspace(0, 1, 40)
        G = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        return G, "uniform grid, 40 x 40 points"
    pts = qmc.Sobol(d, scramble=True, seed=seed).random_base2(14)
    return pts, "scrambled Sobol, 16384 points"


def _pool_points(d, seed=0):
    if d <= 2:
        g = np.linspace(0, 1, 40)
        G = np.stack(np.meshgrid(*([g] * d), indexing="ij"), -1).reshape(-1, d)
        return G
    return qmc.Sobol(d, scramble=True, seed=seed + 1).random_base2(12)


_REGISTRY = {
    # name: (oracle, dim, default_lambda, default lengthscale)
    "forrester": (forrester, 1, 1.0, 0.1),
    "gramacy1d": (gramacy1d, 1, 1.0, 0.05),
    "gramacy2d": (gramacy2d, 2, -1.0, 0.1),
    "branin": (branin, 2, 1.0, 0.2),
    "ishigami": (ishigami, 3, 1.0, 0.2),
    "hartmann3": (hartmann3, 3, 1.0, 0.2),
    "hartmann6": (hartmann6, 6, 1.0, 0.3),
}

NAMES = tuple(_REGISTRY) + ("gp-prior", "fingerprint")


def list_benchmarks():
    return NAMES


def get_benchmark(name, discrete=False, dim=2, seed=0, pool_size=2000, bits=2048):
    """Registered benchmark by name.

    ``gp-prior`` uses ``dim`` and ``seed``; ``fingerprint`` uses ``pool_size``,
    ``bits`` and ``seed``. With ``discrete=True`` the continuous benchmarks are
    restricted to a 40-per-axis grid (``d <= 2``) or 4096 Sobol points.
    """
    key = name.lower().replace("_", "").replace(" ", "")
    if key in ("gpprior", "gp-prior"):
        kern = kernels.KernelSpec("matern52", (0.2,) * dim)
        bench = gp_prior_benchmark(kern, dim, seed)
    elif key == "fingerprint":
        return fingerprint_benchmark(pool_size, bits, seed)
    elif key in _REGISTRY:
        oracle, d, lam, ls = _REGISTRY[key]
        grid, note = _eval_grid(d)
        bench = Benchmark(
            key, d, Domain.unit_box(d), oracle, grid, oracle(grid), lam,
            kernels.KernelSpec("matern52", (ls,) * d), note,
        )
    else:
        raise UnknownBenchmarkError(
            f"unknown benchmark {name!r}; choose from {', '.join(NAMES)}"
        )
    if discrete:
        pool = _pool_points(bench.dim, seed)
        bench = Benchmark(
            bench.name + "-pool", bench.dim, Domain.from_pool(pool), bench.oracle,
            pool, bench.oracle(pool), bench.default_lambda, bench.default_kernel,
            f"pool of {len(pool)} points",
        )
    return bench


def gp_prior_benchmark(kernel, d, seed=0, n_features=4096):
    """Benchmark whose oracle is one fixed prior feature path."""
    path = gp.prior_path(kernel, d, n_features, np.random.default_rng(seed))
    grid, note = _eval_grid(d, seed)
    return Benchmark(
        f"gp-prior-{d}d", d, Domain.unit_box(d), path, grid, path(grid), 1.0,
        kernel, note,
    )


class FingerprintOracle:
    """Score in ``[0.1, 0.3]`` from the best Tanimoto similarity to anchors."""

    def __init__(self, anchors):
        self.anchors = np.asarray(anchors, dtype=bool)

    def similarities(self, X):
        return kernels.cross(
            kernels.KernelSpec("tanimoto"), np.asarray(X, dtype=bool), self.anchors
        )

    def __call__(self, X):
        agg = self.similarities(X).max(axis=1)
        return np.clip(0.1 + 0.2 * agg, 0.1, 0.3)


def synthetic_fingerprint_pool(n, bits=2048, seed=0, density=0.05):
    """Random sparse bit vectors clustered around a few scaffolds.

    Returns
    -------
    pool : ndarray of bool, shape (n, bits)
    oracle : FingerprintOracle
    """
    if n < 2:
        raise ValueError("pool needs at least two points")
    rng = np.random.default_rng(seed)
    n_on = max(1, int(round(density * bits)))

    def random_vec():
        v = np.zeros(bits, dtype=bool)
        v[rng.choice(bits, n_on, replace=False)] = True
        return v

    anchors = np.array([random_vec() for _ in range(3)])
    scaffolds = np.vstack([anchors, [random_vec() for _ in range(12)]])
    pool = np.zeros((n, bits), dtype=bool)
    seen = set()
    i = 0
    while i < n:
        parent = scaffolds[rng.integers(len(scaffolds))]
        keep = rng.uniform(0.1, 0.9)
        on = np.flatnonzero(parent)
        kept = on[rng.uniform(size=len(on)) < keep]
        child = np.zeros(bits, dtype=bool)
        child[kept] = True
        n_new = max(0, n_on - len(kept))
        child[rng.choice(bits, n_new, replace=False)] = True
        key = child.tobytes()
        if key in seen:
            continue
        seen.add(key)
        pool[i] = child
        i += 1
    return pool, FingerprintOracle(anchors)


def fingerprint_benchmark(n=2000, bits=2048, seed=0):
    pool, oracle = synthetic_fingerprint_pool(n, bits, seed)
    return Benchmark(
        "fingerprint", bits, Domain.from_pool(pool), oracle, pool, oracle(pool),
        25.0, kernels.KernelSpec("tanimoto"), f"pool of {n} fingerprints",
    )


def true_weighted_density(bench, spec):
    """Ground-truth ``P_f`` on the evaluation grid (softmax of ``lam f + b``)."""
    return sid.softmax(spec.lam * bench.eval_f + spec.b(bench.eval_grid))
