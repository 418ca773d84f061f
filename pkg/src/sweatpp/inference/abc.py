"""Approximate Bayesian computation for the generative model.

Two samplers share the same simulator interface: a callable
``simulator(theta, window, rng)`` returning a :class:`SummaryVector` (or a
plain array of summaries), raising :class:`UndefinedSummaryError` when the
summaries do not exist. Undefined summaries count as infinite distance.
"""
from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import Window
from ..generative import GenerativeParams, simulate_generative
from ..summaries import SummaryVector, UndefinedSummaryError, abc_summaries
from .priors import Prior
from .ram import RAMAdapter

DEFAULT_BUDGET = 10**6
# acceptance cannot exceed the tolerance quantile, so aim below it
ABC_TARGET_FRACTION = 0.5


class ABCBudgetExceeded(RuntimeError):
    """Proposal budget exhausted before a draw was accepted."""


@dataclass
class AbcSample:
    draws: np.ndarray
    distances: np.ndarray
    names: list = field(default_factory=list)
    #: rejection: the tolerance used; mcmc: the final adaptive tolerance
    tolerance: float = math.inf
    #: rejection: simulations spent; mcmc: chain length (simulations recorded)
    simulations: int = 0
    acceptance_rate: float = float("nan")
    #: final RAM factor of the ABC-MCMC proposal
    scale_factor: np.ndarray | None = None

    def __len__(self) -> int:
        return self.draws.shape[0]

    def median(self) -> np.ndarray:
        return np.median(self.draws, axis=0)


def generative_simulator(theta, window: Window, rng: np.random.Generator) -> SummaryVector:
    """Summaries of one generative-model pattern at ``theta = (R, sigma, p)``."""
    pattern = simulate_generative(GenerativeParams(*map(float, theta)), window, rng)
    return abc_summaries(pattern)


def _as_summary_array(s) -> np.ndarray:
    if isinstance(s, SummaryVector):
        return s.as_array()
    return np.atleast_1d(np.asarray(s, dtype=float))


def summary_distance(simulator, theta, observed: np.ndarray, window, rng) -> float:
    """Euclidean distance between simulated and observed summaries."""
    try:
        s = _as_summary_array(simulator(theta, window, rng))
    except UndefinedSummaryError:
        return math.inf
    d = float(np.linalg.norm(s - observed))
    return d if math.isfinite(d) else math.inf


def abc_rejection(
    observed,
    prior: Prior,
    window: Window,
    epsilon: float,
    M: int,
    rng: np.random.Generator,
    simulator=None,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
) -> AbcSample:
    """Plain rejection ABC: for each of ``M`` draws, propose from the prior
    until the simulated summaries are within ``epsilon`` of ``observed``.

    Each kept draw gets its own random stream seeded from ``rng`` up front,
    so the result does not depend on ``workers``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    M = int(M)
    if M < 1:
        raise ValueError("M must be >= 1")
    if not prior.proper:
        raise ValueError("rejection ABC needs a proper prior to sample from")
    simulator = generative_simulator if simulator is None else simulator
    obs = _as_summary_array(observed)
    seeds = rng.integers(0, 2**63, size=M)

    def one(seed):
        r = np.random.default_rng(int(seed))
        for tries in range(1, budget + 1):
            theta = prior.sample(r)
            d = summary_distance(simulator, theta, obs, window, r)
            if d <= epsilon:
                return theta, d, tries
        raise ABCBudgetExceeded(f"no acceptance within {budget} proposals at epsilon={epsilon}")

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    draws = np.array([r[0] for r in results]).reshape(M, prior.dim)
    dists = np.array([r[1] for r in results])
    spent = int(sum(r[2] for r in results))
    return AbcSample(draws, dists, prior.names, float(epsilon), spent, M / spent)


class RunningQuantile:
    """Running lower ``q``-quantile (the ``ceil(q N)``-th smallest value)
    of a growing stream, by two heaps."""

    def __init__(self, q: float):
        if not 0 < q <= 1:
            raise ValueError("q must lie in (0, 1]")
        self.q = q
        self._low: list[float] = []  # max-heap via negation
        self._high: list[float] = []
        self.count = 0

    def add(self, x: float) -> float:
        self.count += 1
        if self._low and x <= -self._low[0]:
            heapq.heappush(self._low, -x)
        else:
            heapq.heappush(self._high, x)
        k = max(1, math.ceil(self.q * self.count - 1e-9))
        while len(self._low) > k:
            heapq.heappush(self._high, -heapq.heappop(self._low))
        while len(self._low) < k and self._high:
            heapq.heappush(self._low, -heapq.heappop(self._high))
        return self.value

    @property
    def value(self) -> float:
        return -self._low[0] if self._low else math.inf


def abc_mcmc(
    observed,
    prior: Prior,
    window: Window,
    iterations: int,
    keep: int,
    rng: np.random.Generator,
    init=None,
    simulator=None,
    quantile: float | None = None,
    target_rate: float | None = None,
    S0=None,
    max_proposals: int | None = None,
) -> AbcSample:
    """ABC-MCMC with RAM-adapted proposals and an adaptive tolerance.

    The chain runs until ``iterations`` simulations have been made (prior
    support violations are rejected without simulating). A proposal is
    accepted when its distance is within the current tolerance, the running
    ``quantile`` (default ``keep / iterations``) of all distances so far,
    and it passes the prior ratio test. Every simulated ``(theta, distance)``
    pair is recorded; the ``keep`` pairs with smallest distance form the
    returned sample, sorted by distance.

    ``target_rate`` defaults to ``ABC_TARGET_FRACTION`` times the tolerance
    quantile. A proposal is accepted at most about that often, so a larger
    target shrinks the proposal scale towards zero.

    Parameters held by a :class:`PointMass` prior are not moved.
    """
    iterations = int(iterations)
    keep = int(keep)
    if iterations < 1 or keep < 1:
        raise ValueError("iterations and keep must be >= 1")
    if keep > iterations:
        raise ValueError(f"keep ({keep}) exceeds iterations ({iterations})")
    simulator = generative_simulator if simulator is None else simulator
    obs = _as_summary_array(observed)
    q = keep / iterations if quantile is None else float(quantile)
    tol = RunningQuantile(q)
    if target_rate is None:
        target_rate = ABC_TARGET_FRACTION * q
    max_proposals = 100 * iterations if max_proposals is None else int(max_proposals)

    if init is None:
        if not prior.proper:
            raise ValueError("init is required with an improper prior")
        init = prior.sample(rng)
    x = np.asarray(init, dtype=float).copy()
    if not prior.in_support(x):
        raise ValueError(f"initial state {x} is outside the prior support")
    free = ~prior.fixed_mask()
    adapter = None
    if free.any():
        adapter = RAMAdapter(np.diag(prior.initial_scales()[free]) if S0 is None else S0, target_rate)

    thetas = np.empty((iterations, x.size))
    dists = np.empty(iterations)
    d_x = summary_distance(simulator, x, obs, window, rng)
    thetas[0], dists[0] = x, d_x
    tol.add(d_x)
    lp_x = prior.logpdf(x)
    n_sim, proposals, accepted = 1, 0, 0
    while n_sim < iterations:
        proposals += 1
        if proposals > max_proposals:
            raise RuntimeError(f"{max_proposals} proposals made but only {n_sim} simulations")
        y = x.copy()
        u = None
        if adapter is not None:
            u, step = adapter.propose(rng)
            y[free] += step
        alpha = 0.0
        if prior.in_support(y):
            d_y = summary_distance(simulator, y, obs, window, rng)
            thetas[n_sim], dists[n_sim] = y, d_y
            n_sim += 1
            eps = tol.add(d_y)
            if d_y <= eps:
                lp_y = prior.logpdf(y)
                alpha = min(1.0, math.exp(lp_y - lp_x))
                if rng.random() < alpha:
                    x, d_x, lp_x = y, d_y, lp_y
                    accepted += 1
        if adapter is not None:
            adapter.adapt(u, alpha)

    if not np.isfinite(dists).any():
        raise UndefinedSummaryError("summaries were undefined for every simulation")
    order = np.argsort(dists, kind="stable")[:keep]
    return AbcSample(
        thetas[order],
        dists[order],
        prior.names,
        tol.value,
        iterations,
        accepted / max(proposals, 1),
        adapter.S.copy() if adapter is not None else None,
    )
