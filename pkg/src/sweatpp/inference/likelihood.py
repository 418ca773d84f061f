"""Maximum likelihood and Bayesian fitting of the sequential soft-core
models (with or without uniform noise)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit
from scipy.spatial import cKDTree

from ..core import PatternError, PointPattern, QuadratureScheme
from ..sequential import KAPPA_EPS, MixtureParams, SoftcoreLikelihood, SoftcoreParams
from ..validation import check_pattern
from .priors import Prior, mixture_prior
from .ram import DEFAULT_TARGET_RATE, Chain, ram_mcmc

MODELS = ("softcore", "mixture")
MLE_XATOL = 1e-6
MLE_MAXITER = 2000
#: Nelder-Mead initial simplex edge in transformed coordinates
SIMPLEX_STEP = 0.5


@dataclass
class MLEResult:
    model: str
    params: dict
    loglik: float
    n_iter: int
    converged: bool
    transformed: np.ndarray = field(repr=False)


def _clip_kappa(k: float) -> float:
    return min(max(k, KAPPA_EPS), 1.0 - KAPPA_EPS)


def default_init(pattern: PointPattern, model: str) -> dict:
    """Starting values: R from nearest-neighbour spacing, kappa 0.5,
    theta 0.05."""
    if pattern.n >= 2:
        d, _ = cKDTree(pattern.points).query(pattern.points, k=2)
        R = max(float(np.median(d[:, 1])) * 0.8, 1e-3)
    else:
        R = math.sqrt(pattern.window.area)
    init = {"R": R, "kappa": 0.5}
    if model == "mixture":
        init["theta"] = 0.05
    return init


def fit_mle(
    pattern: PointPattern,
    model: str = "softcore",
    quad: QuadratureScheme | None = None,
    init: dict | None = None,
    theta: float | None = None,
    maxiter: int = MLE_MAXITER,
    xatol: float = MLE_XATOL,
) -> MLEResult:
    """Maximise the sequential log-likelihood by Nelder-Mead.

    The search runs over ``log R``, ``logit kappa`` and (mixture only,
    unless ``theta`` fixes it) ``logit theta``, stopping when every simplex
    vertex is within ``xatol`` of the best one or after ``maxiter``
    iterations.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    pattern = check_pattern(pattern)
    if pattern.n < 2:
        raise PatternError("the likelihood does not depend on the parameters for n < 2")
    if quad is None:
        from ..core import make_regular_quadrature

        quad = make_regular_quadrature(pattern.window)
    lik = SoftcoreLikelihood(pattern, quad)
    start = dict(default_init(pattern, model))
    start.update(init or {})
    free_theta = model == "mixture" and theta is None

    z0 = [math.log(start["R"]), float(logit(start["kappa"]))]
    if free_theta:
        z0.append(float(logit(start["theta"])))
    z0 = np.array(z0)

    def unpack(z):
        R = math.exp(z[0])
        kappa = _clip_kappa(float(expit(z[1])))
        if model == "softcore":
            return {"R": R, "kappa": kappa}
        th = float(expit(z[2])) if free_theta else float(theta)
        return {"R": R, "kappa": kappa, "theta": th}

    def loglik(z):
        p = unpack(z)
        if not (math.isfinite(p["R"]) and p["R"] > 0):
            return -math.inf
        if model == "softcore":
            return lik.seq_loglik(SoftcoreParams(p["R"], p["kappa"]))
        return lik.mixture_loglik(MixtureParams(p["R"], p["kappa"], p["theta"]))

    l0 = loglik(z0)
    if not math.isfinite(l0):
        raise ValueError(f"log-likelihood is not finite at the initial values {unpack(z0)}")

    def objective(z):
        v = loglik(z)
        return -v if math.isfinite(v) else math.inf

    simplex = np.vstack([z0, z0 + SIMPLEX_STEP * np.eye(z0.size)])
    res = minimize(
        objective,
        z0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": xatol,
            "fatol": math.inf,
            "maxiter": maxiter,
            "maxfev": 50 * maxiter,
        },
    )
    return MLEResult(model, unpack(res.x), -float(res.fun), int(res.nit), bool(res.success), res.x)


def mixture_log_posterior(pattern: PointPattern, quad: QuadratureScheme, prior: Prior):
    """``theta -> mixture_loglik + log prior`` for vectors ``(R, kappa, theta)``."""
    lik = SoftcoreLikelihood(pattern, quad)

    def log_post(x):
        R, kappa, th = (float(v) for v in x)
        if not KAPPA_EPS <= kappa <= 1 - KAPPA_EPS or not R > 0:
            return -math.inf
        lp = prior.logpdf(x)
        if lp == -math.inf:
            return lp
        return lik.mixture_loglik(MixtureParams(R, kappa, th)) + lp

    return log_post


def fit_bayes_mixture(
    pattern: PointPattern,
    quad: QuadratureScheme | None = None,
    prior: Prior | None = None,
    iterations: int = 120_000,
    burn_in: int = 20_000,
    rng: np.random.Generator | None = None,
    init=None,
    target_rate: float = DEFAULT_TARGET_RATE,
) -> Chain:
    """Posterior sample of ``(R, kappa, theta)`` under the noisy soft-core
    model by Robust Adaptive Metropolis; returns the post-burn-in chain."""
    pattern = check_pattern(pattern, min_points=2)
    if burn_in < 0 or burn_in >= iterations:
        raise ValueError("need 0 <= burn_in < iterations")
    if quad is None:
        from ..core import make_regular_quadrature

        quad = make_regular_quadrature(pattern.window)
    prior = mixture_prior() if prior is None else prior
    if init is None:
        d = default_init(pattern, "mixture")
        init = [d["R"], d["kappa"], d["theta"]]
    chain = ram_mcmc(
        mixture_log_posterior(pattern, quad, prior),
        prior,
        init,
        iterations,
        target_rate=target_rate,
        rng=rng,
    )
    return chain.discard(burn_in)
