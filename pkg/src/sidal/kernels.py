"""Covariance functions normalized so that ``k(x, x) <= 1``.

Continuous inputs are rows of a float array of shape ``(n, d)``. Bit-vector
inputs (Tanimoto) are rows of a boolean or 0/1 integer array of shape
``(n, n_bits)``.
"""

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("se", "matern52", "matern32", "tanimoto")

_ALIASES = {
    "se": "se",
    "rbf": "se",
    "squaredexponential": "se",
    "squared_exponential": "se",
    "matern52": "matern52",
    "matern-5/2": "matern52",
    "matern32": "matern32",
    "matern-3/2": "matern32",
    "tanimoto": "tanimoto",
}

_DIST_FLOOR = 1e-12


class KernelError(ValueError):
    """Invalid kernel specification or incompatible inputs."""


@dataclass(frozen=True)
class KernelSpec:
    """Immutable kernel description.

    Parameters
    ----------
    family : str
        One of ``"se"``, ``"matern52"``, ``"matern32"``, ``"tanimoto"``
        (a few aliases such as ``"rbf"`` are accepted).
    lengthscales : tuple of float
        One positive lengthscale per input dimension. A single value is
        broadcast to every dimension. Ignored for Tanimoto.
    output_scale : float
        Prior variance ``k(x, x)``, in ``(0, 1]``.
    """

    family: str = "matern52"
    lengthscales: tuple = (1.0,)
    output_scale: float = 1.0

    def __post_init__(self):
        fam = _ALIASES.get(str(self.family).lower())
        if fam is None:
            raise KernelError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if fam != "tanimoto":
            if len(ls) == 0 or any(not np.isfinite(v) or v <= 0 for v in ls):
                raise KernelError(f"lengthscales must be positive, got {ls}")
        object.__setattr__(self, "lengthscales", ls)
        if not 0 < self.output_scale <= 1:
            raise KernelError(
                f"output_scale must lie in (0, 1], got {self.output_scale}"
            )

    @property
    def stationary(self):
        return self.family != "tanimoto"

    def with_lengthscales(self, lengthscales):
        return KernelSpec(self.family, tuple(lengthscales), self.output_scale)

    def _scales(self, d):
        ls = np.asarray(self.lengthscales, dtype=float)
        if ls.size == 1:
            return np.full(d, ls[0])
        if ls.size != d:
            raise KernelError(
                f"input dimension {d} does not match {ls.size} lengthscales"
            )
        return ls


def _as_2d(X):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise KernelError(f"expected a 2-d array of points, got shape {X.shape}")
    return X


def scaled_distance(spec, X1, X2):
    """Euclidean distance between rows after dividing by the lengthscales."""
    X1, X2 = _as_2d(X1).astype(float), _as_2d(X2).astype(float)
    if X1.shape[1] != X2.shape[1]:
        raise KernelError("point dimensions differ")
    ls = spec._scales(X1.shape[1])
    A, B = X1 / ls, X2 / ls
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    r = np.sqrt(np.maximum(sq, 0.0))
    r[r < _DIST_FLOOR] = 0.0
    return r


def _tanimoto(X1, X2):
    A = _as_2d(X1)
    B = _as_2d(X2)
    if A.shape[1] != B.shape[1]:
        raise KernelError("bit-vector lengths differ")
    if A.dtype != bool and not np.all((A == 0) | (A == 1)):
        raise KernelError("Tanimoto kernel requires bit-vector inputs")
    if B.dtype != bool and not np.all((B == 0) | (B == 1)):
        raise KernelError("Tanimoto kernel requires bit-vector inputs")
    A = A.astype(np.float32)
    B = B.astype(np.float32)
    inter = (A @ B.T).astype(float)
    union = A.sum(axis=1)[:, None] + B.sum(axis=1)[None, :] - inter
    out = np.ones_like(inter)
    nz = union > 0
    out[nz] = inter[nz] / union[nz]
    return out


def cross(spec, X1, X2):
    """Cross-covariance matrix ``K[i, j] = k(X1[i], X2[j])``."""
    if spec.family == "tanimoto":
        return spec.output_scale * _tanimoto(X1, X2)
    r = scaled_distance(spec, X1, X2)
    if spec.family == "se":
        k = np.exp(-0.5 * r**2)
    elif spec.family == "matern52":
        s = np.sqrt(5.0) * r
        k = (1.0 + s + s**2 / 3.0) * np.exp(-s)
    else:
        s = np.sqrt(3.0) * r
        k = (1.0 + s) * np.exp(-s)
    return spec.output_scale * k


def gram(spec, X):
    """Symmetric Gram matrix of ``X`` with diagonal exactly ``output_scale``."""
    X = _as_2d(X)
    if X.shape[0] == 0:
        raise KernelError("gram requires at least one point")
    K = cross(spec, X, X)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, spec.output_scale)
    return K


def diag(spec, X):
    """Prior variances ``k(x, x)`` for each row of ``X``."""
    return np.full(_as_2d(X).shape[0], spec.output_scale)


def evaluate(spec, x, x2):
    """Scalar kernel value ``k(x, x2)``."""
    return float(cross(spec, np.atleast_1d(x), np.atleast_1d(x2))[0, 0])
