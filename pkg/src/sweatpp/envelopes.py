"""Global rank envelopes with extreme rank length (ERL) ordering.

Curves are compared through their two-sided pointwise ranks among the
observed and simulated curves together. Each curve's ranks are sorted
increasingly and the sorted vectors are ordered lexicographically, so a
curve is more extreme the earlier it reaches a small rank.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .core import PointPattern, Window
from .summaries import FunctionEstimate, default_F_grid, default_pcf_grid, estimate_F, estimate_pcf

MIN_SIMULATIONS = 99
STATISTICS = ("pcf", "F")
MODELS = ("softcore", "mixture", "generative")


class SimulationFailure(RuntimeError):
    """A posterior predictive simulation failed; ``draw`` holds the parameters."""

    def __init__(self, message, draw):
        super().__init__(message)
        self.draw = draw


@dataclass(frozen=True)
class Envelope:
    r: np.ndarray
    lower: np.ndarray
    central: np.ndarray
    upper: np.ndarray
    p_interval: tuple
    level: float
    reject: bool
    observed: np.ndarray | None = field(default=None, repr=False)

    def verdict(self) -> dict:
        return {"p_lo": self.p_interval[0], "p_hi": self.p_interval[1], "reject": self.reject, "level": self.level}

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "lo", "mean", "hi"])
            for row in zip(self.r, self.lower, self.central, self.upper):
                w.writerow([repr(float(v)) for v in row])
        return path

    def verdict_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.verdict(), indent=2, sort_keys=True) + "\n")
        return path


def pointwise_ranks(curves: np.ndarray) -> np.ndarray:
    """Two-sided ranks ``min(rank from below, rank from above)`` per column,
    ties receiving averaged ranks."""
    low = rankdata(curves, method="average", axis=0)
    return np.minimum(low, curves.shape[0] + 1 - low)


def erl_order(curves: np.ndarray) -> np.ndarray:
    """Indices of ``curves`` (rows) from most extreme to most central.

    Rows with identical sorted rank vectors are ordered by their values, so
    the result does not depend on the input order of distinct curves.
    """
    ranks = np.sort(pointwise_ranks(curves), axis=1)
    # np.lexsort sorts by the last key first
    keys = [curves[:, j] for j in range(curves.shape[1] - 1, -1, -1)]
    keys += [ranks[:, j] for j in range(ranks.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _erl_measure(curves: np.ndarray) -> np.ndarray:
    """Position of each curve in the ERL order, ties sharing the lowest
    position; small means extreme."""
    ranks = np.sort(pointwise_ranks(curves), axis=1)
    _, inverse = np.unique(ranks, axis=0, return_inverse=True)
    return np.asarray(inverse).ravel()


def central_count(m: int, level: float) -> int:
    """Number of most central simulated curves spanning the envelope."""
    return math.ceil(level * (m + 1) - 1e-9) - 1


def global_rank_envelope(
    observed: FunctionEstimate | np.ndarray,
    simulated,
    level: float = 0.95,
    r=None,
) -> Envelope:
    """ERL global envelope and test.

    Parameters
    ----------
    observed : FunctionEstimate or array
        Observed curve.
    simulated : sequence of FunctionEstimate, or 2-D array (m x grid)
        Simulated curves on the same grid, ``m >= 99``.
    level : float
        Envelope coverage, in (0, 1).

    Returns
    -------
    Envelope
        Bounds are the pointwise extremes of the ``ceil(level (m+1)) - 1``
        most central simulated curves. The p-interval is
        ``[(1 + #more extreme), (1 + #at least as extreme)] / (m + 1)``
        counted over simulations, and ``reject`` holds iff its upper end is
        below ``1 - level``.
    """
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if isinstance(observed, FunctionEstimate):
        r = observed.r
        obs = np.asarray(observed.value, float)
    else:
        obs = np.asarray(observed, float).ravel()
    if r is None:
        r = np.arange(obs.size, dtype=float)
    r = np.asarray(r, float)
    rows = []
    for s in simulated:
        if isinstance(s, FunctionEstimate):
            if s.r.shape != r.shape or not np.allclose(s.r, r, rtol=1e-12, atol=0):
                raise ValueError("simulated curve is on a different r grid than the observed one")
            rows.append(np.asarray(s.value, float))
        else:
            rows.append(np.asarray(s, float).ravel())
    sims = np.vstack(rows) if rows else np.empty((0, obs.size))
    if sims.shape[1] != obs.size:
        raise ValueError(f"simulated curves have {sims.shape[1]} points, observed has {obs.size}")
    m = sims.shape[0]
    k = central_count(m, level)
    if m < MIN_SIMULATIONS or k < 1:
        raise ValueError(f"need at least {MIN_SIMULATIONS} simulations at level {level}, got {m}")
    if not (np.all(np.isfinite(sims)) and np.all(np.isfinite(obs))):
        raise ValueError("curves must be finite")

    allc = np.vstack([obs, sims])
    e = _erl_measure(allc)
    e_obs, e_sim = e[0], e[1:]
    p_lo = (1 + int(np.sum(e_sim < e_obs))) / (m + 1)
    p_hi = (1 + int(np.sum(e_sim <= e_obs))) / (m + 1)

    order = erl_order(allc)
    central_sims = [i - 1 for i in order[::-1] if i != 0][:k]
    chosen = sims[np.sort(central_sims)]
    return Envelope(
        r=r,
        lower=chosen.min(axis=0),
        central=sims.mean(axis=0),
        upper=chosen.max(axis=0),
        p_interval=(p_lo, p_hi),
        level=float(level),
        reject=bool(p_hi < 1 - level),
        observed=obs,
    )


def _statistic(pattern: PointPattern, statistic: str, r):
    if statistic == "pcf":
        return estimate_pcf(pattern, r)
    return estimate_F(pattern, r)


def _default_grid(window: Window, statistic: str) -> np.ndarray:
    return default_pcf_grid(window) if statistic == "pcf" else default_F_grid(window)


def _simulator(model: str, n: int, window: Window, noise_free: bool):
    if model == "generative":
        from .generative import GenerativeParams, simulate_generative

        return lambda th, rng: simulate_generative(GenerativeParams(*th[:3]), window, rng)
    from .sequential import MixtureParams, SoftcoreParams, simulate_mixture, simulate_sequential

    if model == "softcore" or noise_free:
        return lambda th, rng: simulate_sequential(n, SoftcoreParams(th[0], th[1]), window, rng)
    return lambda th, rng: simulate_mixture(n, MixtureParams(*th[:3]), window, rng)


def posterior_predictive_envelope(
    sample,
    model: str,
    observed_pattern: PointPattern,
    statistic: str = "pcf",
    nsim: int = 999,
    rng: np.random.Generator | None = None,
    level: float = 0.95,
    noise_free: bool = True,
    r=None,
) -> Envelope:
    """Global envelope from the posterior predictive distribution.

    ``nsim`` parameter rows are drawn with replacement from ``sample``
    (a :class:`~sweatpp.inference.Chain`, an
    :class:`~sweatpp.inference.AbcSample` or an array), one pattern is
    simulated per row and ``statistic`` is evaluated on the observed grid.
    For the mixture model the uniform noise is left out when ``noise_free``.
    Sequential models are simulated with the observed number of points.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    nsim = int(nsim)
    if nsim < MIN_SIMULATIONS:
        raise ValueError(f"need nsim >= {MIN_SIMULATIONS}, got {nsim}")
    draws = np.atleast_2d(np.asarray(getattr(sample, "draws", sample), dtype=float))
    if draws.shape[0] == 0:
        raise ValueError("posterior sample is empty")
    rng = np.random.default_rng() if rng is None else rng
    window = observed_pattern.window
    r = _default_grid(window, statistic) if r is None else np.asarray(r, float)
    observed = _statistic(observed_pattern, statistic, r)

    rows = rng.integers(0, draws.shape[0], size=nsim)
    seeds = rng.integers(0, 2**63, size=nsim)
    sim = _simulator(model, observed_pattern.n, window, noise_free)
    curves = np.empty((nsim, r.size))
    for i, (row, seed) in enumerate(zip(rows, seeds)):
        theta = draws[row]
        try:
            pattern = sim(theta, np.random.default_rng(int(seed)))
            curves[i] = _statistic(pattern, statistic, r).value
        except Exception as exc:
            raise SimulationFailure(f"simulation {i} failed at parameters {theta.tolist()}: {exc}", theta) from exc
    return global_rank_envelope(observed, curves, level, r)
