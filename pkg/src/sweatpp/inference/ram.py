"""Robust Adaptive Metropolis (Vihola, 2012).

Random-walk Metropolis whose proposal increment is ``S_n u_n`` with
``u_n ~ N(0, I)``. After each step the lower-triangular factor is updated
so that

    S_n S_n^T = S_{n-1} (I + eta_n (alpha_n - target) u u^T / |u|^2) S_{n-1}^T

with ``eta_n = min(1, d n^(-2/3))`` and ``alpha_n`` the acceptance
probability of step ``n``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TARGET_RATE = 0.234
ADAPTATION_DECAY = 2.0 / 3.0


@dataclass
class Chain:
    """Output of an MCMC run; rows of ``draws`` are successive states."""

    draws: np.ndarray
    log_posterior: np.ndarray
    accepted: np.ndarray
    names: list = field(default_factory=list)
    scale_factor: np.ndarray | None = None

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self) else 0.0

    def discard(self, burn_in: int) -> "Chain":
        return Chain(
            self.draws[burn_in:],
            self.log_posterior[burn_in:],
            self.accepted[burn_in:],
            list(self.names),
            self.scale_factor,
        )

    def median(self) -> np.ndarray:
        return np.median(self.draws, axis=0)


class RAMAdapter:
    """Cholesky-factor adaptation shared by the likelihood and ABC chains."""

    def __init__(self, S0, target_rate: float = DEFAULT_TARGET_RATE):
        if not 0 < target_rate < 1:
            raise ValueError(f"target_rate must lie in (0, 1), got {target_rate}")
        S0 = np.atleast_2d(np.asarray(S0, dtype=float))
        self.S = np.linalg.cholesky(S0 @ S0.T)
        self.dim = self.S.shape[0]
        self.target_rate = target_rate
        self.step = 0
        self.refused = 0

    def propose(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        u = rng.standard_normal(self.dim)
        return u, self.S @ u

    def adapt(self, u: np.ndarray, alpha: float) -> None:
        self.step += 1
        norm2 = float(u @ u)
        if norm2 == 0.0:
            return
        eta = min(1.0, self.dim * self.step ** (-ADAPTATION_DECAY))
        coef = eta * (alpha - self.target_rate)
        v = self.S @ u
        M = self.S @ self.S.T + coef * np.outer(v, v) / norm2
        try:
            S_new = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            S_new = None
        if S_new is None or not np.all(np.isfinite(S_new)):
            self.refused += 1
            logger.debug("RAM update %d lost positive definiteness; kept previous factor", self.step)
            return
        self.S = S_new


def ram_mcmc(
    log_posterior,
    prior,
    init,
    iterations: int,
    target_rate: float = DEFAULT_TARGET_RATE,
    rng: np.random.Generator | None = None,
    S0=None,
) -> Chain:
    """Run a RAM chain and return every state (no burn-in removed).

    Parameters
    ----------
    log_posterior : callable
        Maps a parameter vector to its log posterior density (up to a
        constant). Only called for proposals inside ``prior``'s support.
    prior : Prior
        Defines the support and, through :meth:`Prior.initial_scales`, the
        default initial factor (diagonal, 10 % of each prior IQR).
    init : array-like
        Starting state; ``log_posterior(init)`` must be finite.
    """
    iterations = int(iterations)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    x = np.asarray(init, dtype=float).copy()
    if not prior.in_support(x):
        raise ValueError(f"initial state {x} is outside the prior support")
    lp = float(log_posterior(x))
    if not math.isfinite(lp):
        raise ValueError(f"log posterior is not finite at the initial state {x}")
    free = ~prior.fixed_mask()
    if S0 is None:
        S0 = np.diag(prior.initial_scales()[free])
    d = int(free.sum())
    draws = np.empty((iterations, x.size))
    lps = np.empty(iterations)
    accepted = np.zeros(iterations, dtype=bool)
    draws[0], lps[0] = x, lp
    adapter = RAMAdapter(S0, target_rate) if d else None
    for n in range(1, iterations):
        if adapter is None:
            draws[n], lps[n] = x, lp
            continue
        u, step = adapter.propose(rng)
        y = x.copy()
        y[free] += step
        alpha = 0.0
        if prior.in_support(y):
            lp_y = float(log_posterior(y))
            if math.isfinite(lp_y):
                log_ratio = lp_y - lp
                alpha = 1.0 if log_ratio >= 0 else math.exp(log_ratio)
                if rng.random() < alpha:
                    x, lp = y, lp_y
                    accepted[n] = True
        adapter.adapt(u, alpha)
        draws[n], lps[n] = x, lp
    names = list(getattr(prior, "names", []))
    return Chain(draws, lps, accepted, names, adapter.S.copy() if adapter else None)
