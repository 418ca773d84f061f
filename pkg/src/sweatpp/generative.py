"""Generative model: disturbed simple sequential inhibition, thinned.

The unobserved gland pattern is an SSI pattern with hard-core distance
``R``, each point displaced by isotropic Gaussian noise of scale
``sigma``. Activated glands are an independent ``p``-thinning of it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import PointPattern, Window, validate_pattern
from .validation import check_probability

DEFAULT_MAX_FAILURES = 300
#: dilation margin is R + EDGE_SIGMAS * sigma
EDGE_SIGMAS = 4.0


@dataclass(frozen=True)
class GenerativeParams:
    R: float
    sigma: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and self.R > 0):
            raise ValueError(f"R must be positive, got {self.R}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")

    def as_array(self) -> np.ndarray:
        return np.array([self.R, self.sigma, self.p])


def simulate_ssi(
    R: float,
    window: Window,
    rng: np.random.Generator,
    max_failures: int = DEFAULT_MAX_FAILURES,
) -> PointPattern:
    """Simple sequential inhibition until ``max_failures`` proposals in a
    row are rejected.

    A uniform proposal is accepted iff it is at distance >= ``R`` from every
    accepted point. Points are returned in acceptance order.
    """
    R = float(R)
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    max_failures = int(max_failures)
    if max_failures < 1:
        raise ValueError("max_failures must be >= 1")
    # cells of side R: conflicts can only sit in the 3 x 3 block around a proposal
    cell = max(R, 1e-9 * max(window.width, window.height))
    cell = min(cell, max(window.width, window.height))
    chunk = 4096
    uniforms = rng.random((chunk, 2))
    while True:
        pts, used = _kernels.ssi_fill(window.width, window.height, R, max_failures, uniforms, cell)
        if used >= 0:
            return PointPattern(pts, window)
        # replay the same prefix with more draws appended
        uniforms = np.vstack([uniforms, rng.random((uniforms.shape[0], 2))])


def disturb(pattern: PointPattern, sigma: float, rng: np.random.Generator) -> PointPattern:
    """Displace every point by independent ``N(0, sigma^2 I)`` noise."""
    sigma = float(sigma)
    if not sigma >= 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return pattern
    shift = rng.normal(0.0, sigma, size=pattern.points.shape)
    return PointPattern(pattern.points + shift, pattern.window)


def thin(pattern: PointPattern, p: float, rng: np.random.Generator) -> PointPattern:
    """Keep each point independently with probability ``p``."""
    p = check_probability("p", p)
    keep = rng.random(pattern.n) < p
    return pattern.subset(keep)


def simulate_generative(
    params: GenerativeParams,
    window: Window,
    rng: np.random.Generator,
    max_failures: int = DEFAULT_MAX_FAILURES,
) -> PointPattern:
    """Disturbed, thinned SSI observed in ``window``.

    SSI runs on the window dilated by ``R + 4 sigma`` so that cropping after
    the disturbance does not deplete points near the edges.
    """
    margin = params.R + EDGE_SIGMAS * params.sigma
    big, shift = window.dilate(margin)
    ssi = simulate_ssi(params.R, big, rng, max_failures)
    moved = disturb(ssi, params.sigma, rng)
    pts = moved.points - shift
    inside = window.contains(pts)
    cropped = PointPattern(pts[inside], window)
    return validate_pattern(thin(cropped, params.p, rng))
