"""Parameter estimation for the sequential and generative models."""
from .abc import (
    ABCBudgetExceeded,
    AbcSample,
    RunningQuantile,
    abc_mcmc,
    abc_rejection,
    generative_simulator,
)
from .estimators import BayesMixture, GenerativeABC, SequentialMLE, abc_default_init
from .likelihood import MLEResult, fit_bayes_mixture, fit_mle, mixture_log_posterior
from .priors import Gamma, ImproperUniform, PointMass, Prior, Uniform, generative_prior, mixture_prior
from .ram import Chain, RAMAdapter, ram_mcmc

__all__ = [
    "ABCBudgetExceeded",
    "AbcSample",
    "BayesMixture",
    "Chain",
    "Gamma",
    "GenerativeABC",
    "ImproperUniform",
    "MLEResult",
    "PointMass",
    "Prior",
    "RAMAdapter",
    "RunningQuantile",
    "SequentialMLE",
    "Uniform",
    "abc_default_init",
    "abc_mcmc",
    "abc_rejection",
    "fit_bayes_mixture",
    "fit_mle",
    "generative_prior",
    "generative_simulator",
    "mixture_log_posterior",
    "mixture_prior",
    "ram_mcmc",
]
