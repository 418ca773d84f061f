"""Sequential soft-core arrival model, with and without uniform noise.

Points arrive one at a time. The first is uniform on the window ``W``; the
``k``-th has density proportional to

    exp(-sum_{i<k} (R / d(y, x_i))^(2/kappa))

given the earlier arrivals. With probability ``theta`` an arrival is
instead uniform noise on ``W`` (mixture model).

Log-likelihoods use a quadrature scheme for the normalising integrals.
Per quadrature node the interaction sum over the prefix is accumulated as
points arrive, so each node-point term is evaluated once: ``O(J n)`` work
for all ``n - 1`` normalisers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PatternError, PointPattern, QuadratureScheme, Window
from .validation import check_pattern, check_probability

#: kappa is kept inside (KAPPA_EPS, 1 - KAPPA_EPS) by the fitting code
KAPPA_EPS = 1e-6
DEFAULT_MAX_PROPOSALS = 10**7


class WindowSaturatedError(RuntimeError):
    """Rejection sampler hit its proposal cap; no room for another point."""


@dataclass(frozen=True)
class SoftcoreParams:
    R: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and self.R > 0):
            raise ValueError(f"R must be positive, got {self.R}")
        if not 0 < self.kappa < 1:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")

    @property
    def exponent(self) -> float:
        return 2.0 / self.kappa


@dataclass(frozen=True)
class MixtureParams:
    R: float
    kappa: float
    theta: float

    def __post_init__(self):
        SoftcoreParams(self.R, self.kappa)
        check_probability("theta", self.theta)

    @property
    def softcore(self) -> SoftcoreParams:
        return SoftcoreParams(self.R, self.kappa)


def _interaction(log_dist, R: float, exponent: float) -> np.ndarray:
    """``(R/d)^exponent`` from log distances; ``d = 0`` gives ``inf``."""
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(exponent * (math.log(R) - log_dist))


def _log(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def softcore_log_potential(y, prefix, params: SoftcoreParams) -> float:
    """``-sum_i (R / d(y, x_i))^(2/kappa)`` over the prefix points.

    Returns ``-inf`` if ``y`` coincides with a prefix point and ``0`` for an
    empty prefix.
    """
    prefix = np.asarray(prefix, dtype=float).reshape(-1, 2)
    if prefix.shape[0] == 0:
        return 0.0
    d = np.hypot(*(prefix - np.asarray(y, dtype=float)).T)
    return -float(_interaction(_log(d), params.R, params.exponent).sum())


def _log_mean_exp_rows(a: np.ndarray, log_w: np.ndarray) -> np.ndarray:
    """Row-wise ``log sum_j exp(log_w[j] + a[:, j])`` allowing all ``-inf``.

    Overwrites ``a``.
    """
    b = a
    b += log_w
    m = b.max(axis=1)
    finite = np.isfinite(m)
    out = np.full(a.shape[0], -np.inf)
    if finite.all():
        b -= m[:, None]
        np.exp(b, out=b)
        out = m + np.log(b.sum(axis=1))
    elif finite.any():
        sub = b[finite] - m[finite, None]
        out[finite] = m[finite] + np.log(np.exp(sub).sum(axis=1))
    return out


class SoftcoreLikelihood:
    """Log-likelihood of one ordered pattern under the soft-core models.

    Distances that do not depend on the parameters (node to point, point to
    point) are computed once at construction, so repeated evaluations in an
    optimiser or MCMC only pay for the parameter-dependent terms.
    """

    def __init__(self, pattern: PointPattern, quad: QuadratureScheme):
        self.pattern = check_pattern(pattern, min_points=1)
        self.quad = quad
        pts = self.pattern.points
        self.n = pts.shape[0]
        self.log_area = math.log(self.pattern.window.area)
        self._log_w = np.log(quad.weights)
        # (n - 1, J): log distance from arrival i (< n-1) to every node
        diff = pts[:-1, None, :] - quad.nodes[None, :, :]
        self._log_node_dist = _log(np.hypot(diff[..., 0], diff[..., 1]))
        # strictly lower triangle of point-point log distances
        i, j = np.tril_indices(self.n, k=-1)
        self._pair_rows = i
        self._pair_log_dist = _log(np.hypot(*(pts[i] - pts[j]).T))

    def log_normalizers(self, params: SoftcoreParams) -> np.ndarray:
        """``log Z_k`` for ``k = 2..n`` where ``1/Z_k`` is the integral of
        the unnormalised arrival density given the first ``k-1`` points."""
        if self.n < 2:
            return np.empty(0)
        buf = np.subtract(math.log(params.R), self._log_node_dist)
        buf *= params.exponent
        with np.errstate(over="ignore"):
            np.exp(buf, out=buf)
        np.cumsum(buf, axis=0, out=buf)
        np.negative(buf, out=buf)
        return -_log_mean_exp_rows(buf, self._log_w)

    def log_potentials(self, params: SoftcoreParams) -> np.ndarray:
        """Potential of each arrival ``k = 2..n`` given its prefix."""
        terms = _interaction(self._pair_log_dist, params.R, params.exponent)
        pot = -np.bincount(self._pair_rows, weights=terms, minlength=self.n)
        return pot[1:]

    def arrival_log_densities(self, params: SoftcoreParams) -> np.ndarray:
        """``log f_SC(x_k; x_1..x_{k-1})`` for ``k = 2..n``.

        If quadrature finds no mass left in the window (every node fully
        inhibited) the arrival is treated as impossible (``-inf``).
        """
        log_z = self.log_normalizers(params)
        pot = self.log_potentials(params)
        with np.errstate(invalid="ignore"):
            out = log_z + pot
        out[~np.isfinite(log_z) | np.isnan(out)] = -np.inf
        return out

    def seq_loglik(self, params: SoftcoreParams) -> float:
        if self.n == 1:
            return -self.log_area
        return float(-self.log_area + self.arrival_log_densities(params).sum())

    def mixture_loglik(self, params: MixtureParams) -> float:
        theta = params.theta
        if theta == 0.0:
            return self.seq_loglik(params.softcore)
        if theta == 1.0:
            return -self.n * self.log_area
        if self.n == 1:
            return -self.log_area
        soft = math.log1p(-theta) + self.arrival_log_densities(params.softcore)
        noise = math.log(theta) - self.log_area
        return float(-self.log_area + np.logaddexp(soft, noise).sum())


def log_normalizer_series(pattern: PointPattern, params: SoftcoreParams, quad: QuadratureScheme) -> np.ndarray:
    """``(log Z_k)_{k=2..n}`` by running sums over quadrature nodes."""
    pattern = check_pattern(pattern)
    if pattern.n < 2:
        raise PatternError("normaliser series needs at least 2 points")
    return SoftcoreLikelihood(pattern, quad).log_normalizers(params)


def seq_loglik(pattern: PointPattern, params: SoftcoreParams, quad: QuadratureScheme) -> float:
    """Log-likelihood of the ordered pattern under the soft-core model.

    ``-log|W| + sum_{k>=2} [log Z_k - sum_{i<k} (R/d(x_k, x_i))^(2/kappa)]``;
    ``-inf`` if two points coincide.
    """
    return SoftcoreLikelihood(pattern, quad).seq_loglik(params)


def mixture_loglik(pattern: PointPattern, params: MixtureParams, quad: QuadratureScheme) -> float:
    """Log-likelihood under the soft-core model mixed with uniform noise:
    ``-log|W| + sum_{k>=2} log[(1-theta) f_SC(x_k) + theta/|W|]``."""
    return SoftcoreLikelihood(pattern, quad).mixture_loglik(params)


# --------------------------------------------------------------------------
# simulation


def draw_arrival(
    prefix,
    params: SoftcoreParams,
    window: Window,
    rng: np.random.Generator,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
) -> np.ndarray:
    """One exact draw from the soft-core arrival density given ``prefix``.

    Rejection sampling from uniform proposals: the acceptance probability
    ``exp(potential)`` never exceeds 1. Proposals are drawn in batches of
    doubling size; the first accepted proposal in stream order is returned.
    """
    prefix = np.asarray(prefix, dtype=float).reshape(-1, 2)
    log_r = math.log(params.R)
    e = params.exponent
    scale = np.array([window.width, window.height])
    used = 0
    batch = 16
    while used < max_proposals:
        b = min(batch, max_proposals - used)
        y = rng.random((b, 2)) * scale
        u = rng.random(b)
        if prefix.shape[0]:
            diff = y[:, None, :] - prefix[None, :, :]
            d = np.hypot(diff[..., 0], diff[..., 1])
            with np.errstate(over="ignore", divide="ignore"):
                pot = -np.exp(e * (log_r - np.log(d))).sum(axis=1)
            accept = np.log(u) < pot
        else:
            accept = np.ones(b, dtype=bool)
        hit = np.flatnonzero(accept)
        if hit.size:
            return y[hit[0]]
        used += b
        batch = min(batch * 2, 4096)
    raise WindowSaturatedError(
        f"no arrival accepted in {max_proposals} proposals after {prefix.shape[0]} points"
    )


def _simulate(n, params: SoftcoreParams, theta: float, window: Window, rng, max_proposals):
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scale = np.array([window.width, window.height])
    pts = np.empty((n, 2))
    pts[0] = rng.random(2) * scale
    for k in range(1, n):
        if theta > 0 and rng.random() < theta:
            pts[k] = rng.random(2) * scale
        else:
            pts[k] = draw_arrival(pts[:k], params, window, rng, max_proposals)
    return PointPattern(pts, window)


def simulate_sequential(
    n: int,
    params: SoftcoreParams,
    window: Window,
    rng: np.random.Generator,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
) -> PointPattern:
    """Simulate ``n`` arrivals of the soft-core sequential model."""
    return _simulate(n, params, 0.0, window, rng, max_proposals)


def simulate_mixture(
    n: int,
    params: MixtureParams,
    window: Window,
    rng: np.random.Generator,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
) -> PointPattern:
    """Simulate the noisy model: each arrival after the first is uniform
    with probability ``theta``, else soft-core given all earlier points.

    With ``theta == 0`` no noise coin is drawn, so the output matches
    :func:`simulate_sequential` on the same stream exactly.
    """
    return _simulate(n, params.softcore, params.theta, window, rng, max_proposals)
