"""Scikit-learn style front end for SID-aware query selection."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import acquisition, gp, kernels, sid, smc
from .benchmarks import Domain
from .gp import GaussianProcess


class SIDActiveLearner(BaseEstimator):
    """Propose the next query for a dataset under a Boltzmann target.

    ``fit`` conditions the GP on the labelled data; ``query`` returns the next
    input to label from a pool (``(n, d)`` array) or a box (``(lower, upper)``).

    Parameters
    ----------
    method : {"absid", "tssid", "rs", "us", "imse", "ghal"}
    lam : float
        Boltzmann inverse temperature, nonzero.
    kernel, lengthscales, output_scale, noise_var :
        GP settings, as in :class:`~sidal.gp.GaussianProcess`.
    use_constraint : bool
        Restrict SID queries to the potential set of high-variance points.
    first_order : bool
        Add the first-order correction to AB-SID (pools only).
    n_particles : int, optional
        SMC particle count for boxes; ``1000 * d`` by default.
    random_state : int, optional
    """

    def __init__(self, method="absid", lam=1.0, kernel="matern52", lengthscales=0.2,
                 output_scale=1.0, noise_var=1e-4, use_constraint=True,
                 first_order=False, n_particles=None, random_state=None):
        self.method = method
        self.lam = lam
        self.kernel = kernel
        self.lengthscales = lengthscales
        self.output_scale = output_scale
        self.noise_var = noise_var
        self.use_constraint = use_constraint
        self.first_order = first_order
        self.n_particles = n_particles
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=None, y_numeric=True)
        self.gp_ = GaussianProcess(
            self.kernel, self.lengthscales, self.output_scale, self.noise_var
        ).fit(X, y)
        self.posterior_ = self.gp_.posterior_
        self.n_features_in_ = X.shape[1]
        self.rng_ = np.random.default_rng(self.random_state)
        self.spec_ = sid.BoltzmannSpec(self.lam)
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "posterior_")
        return self.gp_.predict(X, return_std=return_std)

    def _domain(self, domain):
        if isinstance(domain, Domain):
            return domain
        if isinstance(domain, tuple) and len(domain) == 2:
            return Domain.box(*domain)
        return Domain.from_pool(check_array(domain, dtype=None))

    def query(self, domain):
        """Next input to label, plus the full :class:`AcquisitionResult`."""
        check_is_fitted(self, "posterior_")
        dom = self._domain(domain)
        method = acquisition.canonical_method(self.method)
        cfg = None
        if not dom.discrete:
            cfg = smc.SmcConfig(self.n_particles or 1000 * dom.dim)
        acq = acquisition.AcquisitionSpec(
            method, self.use_constraint, self.first_order and dom.discrete,
            smc_config=cfg,
        )
        post, rng = self.posterior_, self.rng_
        if method in ("absid", "tssid"):
            res = acquisition.select_sid(post, self.spec_, dom, acq, rng)
        elif method == "rs":
            res = acquisition.select_rs(post, dom, rng)
        elif method == "us":
            res = acquisition.select_us(post, dom, rng)
        elif method == "imse":
            res = acquisition.select_imse(post, dom, rng)
        else:
            tau, eta = acquisition.draw_ghal_hyperparameters(acq.ghal, rng)
            res = acquisition.select_ghal(post, self.spec_, dom, acq, rng, tau, eta)
        return res.x_chosen, res
