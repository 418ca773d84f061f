"""scikit-learn style wrappers around the fitting routines.

Each estimator takes a :class:`~sweatpp.core.PointPattern` (or an ``n x 2``
array plus ``window``) in :meth:`fit` and exposes fitted parameters as
attributes with a trailing underscore.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..core import make_regular_quadrature
from ..summaries import SummaryVector, abc_summaries
from ..validation import check_pattern, check_random_state
from .abc import abc_mcmc
from .likelihood import fit_bayes_mixture, fit_mle
from .priors import generative_prior, mixture_prior
from .ram import DEFAULT_TARGET_RATE

#: sigma and p used to start ABC-MCMC; R starts at the observed r2
ABC_INIT_SIGMA = 5.0
ABC_INIT_P = 0.5


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        from sklearn.exceptions import NotFittedError

        raise NotFittedError(f"{type(est).__name__} is not fitted yet")


class SequentialMLE(BaseEstimator):
    """Maximum likelihood fit of the soft-core or mixture sequential model.

    Parameters
    ----------
    model : {"softcore", "mixture"}
    n_quadrature : int
        Target number of quadrature nodes.
    init : dict, optional
        Starting values; missing entries use data-driven defaults.
    theta : float, optional
        Fix the noise probability of the mixture model.
    window : Window or (width, height), optional
        Window for bare coordinate arrays.

    Attributes
    ----------
    params_ : dict
    loglik_ : float
    result_ : MLEResult
    """

    def __init__(self, model="softcore", n_quadrature=10_800, init=None, theta=None, window=None):
        self.model = model
        self.n_quadrature = n_quadrature
        self.init = init
        self.theta = theta
        self.window = window

    def fit(self, X, y=None):
        pattern = check_pattern(X, self.window, min_points=2)
        quad = make_regular_quadrature(pattern.window, self.n_quadrature)
        self.result_ = fit_mle(pattern, self.model, quad, self.init, self.theta)
        self.params_ = dict(self.result_.params)
        self.loglik_ = self.result_.loglik
        return self

    def score(self, X, y=None) -> float:
        """Log-likelihood of ``X`` at the fitted parameters."""
        _check_fitted(self, "params_")
        from ..sequential import MixtureParams, SoftcoreParams, mixture_loglik, seq_loglik

        pattern = check_pattern(X, self.window, min_points=1)
        quad = make_regular_quadrature(pattern.window, self.n_quadrature)
        if self.model == "softcore":
            return seq_loglik(pattern, SoftcoreParams(**self.params_), quad)
        return mixture_loglik(pattern, MixtureParams(**self.params_), quad)


class BayesMixture(BaseEstimator):
    """Posterior sampling for the soft-core-plus-noise model by RAM.

    Attributes
    ----------
    chain_ : Chain
        Post-burn-in draws.
    posterior_median_ : dict
    """

    def __init__(
        self,
        prior=None,
        iterations=120_000,
        burn_in=20_000,
        n_quadrature=10_800,
        target_rate=DEFAULT_TARGET_RATE,
        random_state=None,
        window=None,
    ):
        self.prior = prior
        self.iterations = iterations
        self.burn_in = burn_in
        self.n_quadrature = n_quadrature
        self.target_rate = target_rate
        self.random_state = random_state
        self.window = window

    def fit(self, X, y=None):
        pattern = check_pattern(X, self.window, min_points=2)
        quad = make_regular_quadrature(pattern.window, self.n_quadrature)
        prior = mixture_prior() if self.prior is None else self.prior
        self.chain_ = fit_bayes_mixture(
            pattern,
            quad,
            prior,
            self.iterations,
            self.burn_in,
            check_random_state(self.random_state),
            target_rate=self.target_rate,
        )
        self.posterior_median_ = dict(zip(prior.names, self.chain_.median()))
        return self


def abc_default_init(observed: SummaryVector, prior) -> np.ndarray:
    """ABC-MCMC start: ``R`` at the observed ``r2`` (moved into the prior
    support), ``sigma = 5`` and ``p = 0.5``; point-mass marginals keep
    their value."""
    from .priors import PointMass

    start = {"R": observed.r2, "sigma": ABC_INIT_SIGMA, "p": ABC_INIT_P}
    x = []
    for name, m in prior.marginals.items():
        if isinstance(m, PointMass):
            x.append(m.value)
            continue
        v = start.get(name)
        if v is None or not m.in_support(v):
            lo = getattr(m, "low", None)
            v = (lo + 1.0) if lo is not None and m.in_support(lo + 1.0) else float(m.sample(np.random.default_rng(0)))
        x.append(float(v))
    return np.array(x)


class GenerativeABC(BaseEstimator):
    """ABC-MCMC fit of the thinned disturbed SSI model.

    Attributes
    ----------
    observed_summaries_ : SummaryVector
    sample_ : AbcSample
        The ``keep`` simulated parameter vectors closest to the data.
    posterior_median_ : dict
    """

    def __init__(
        self,
        prior=None,
        iterations=200_000,
        keep=5_000,
        init=None,
        target_rate=None,
        random_state=None,
        window=None,
    ):
        self.prior = prior
        self.iterations = iterations
        self.keep = keep
        self.init = init
        self.target_rate = target_rate
        self.random_state = random_state
        self.window = window

    def fit(self, X, y=None):
        pattern = check_pattern(X, self.window)
        prior = generative_prior() if self.prior is None else self.prior
        self.observed_summaries_ = abc_summaries(pattern)
        init = abc_default_init(self.observed_summaries_, prior) if self.init is None else self.init
        self.sample_ = abc_mcmc(
            self.observed_summaries_,
            prior,
            pattern.window,
            self.iterations,
            self.keep,
            check_random_state(self.random_state),
            init=init,
            target_rate=self.target_rate,
        )
        self.posterior_median_ = dict(zip(prior.names, self.sample_.median()))
        return self
