"""Summary functions of point patterns and the three ABC summary statistics.

* :func:`estimate_pcf` -- kernel estimate of the pair correlation function
  with translation edge correction and Epanechnikov kernel.
* :func:`estimate_F` -- Kaplan-Meier estimate of the empty space function.
* :func:`pool_pcf` -- pooling of several pcf estimates with weights n^2.
* :func:`abc_summaries` -- distances where g first climbs to 0.75 and 1
  (beyond 10 px) and where F first reaches 0.5.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import _kernels
from .core import PatternError, PointPattern, Window
from .validation import check_pattern, check_patterns

PCF_GRID_SIZE = 512
F_LATTICE_DIVISIONS = 256
MIN_SUMMARY_DISTANCE = 10.0
R1_LEVEL, R2_LEVEL, R3_LEVEL = 0.75, 1.0, 0.5


class UndefinedSummaryError(ValueError):
    """A summary threshold is never crossed on the evaluation grid."""


@dataclass(frozen=True)
class FunctionEstimate:
    r: np.ndarray
    value: np.ndarray
    kind: str

    def __post_init__(self):
        r = np.array(self.r, dtype=float).ravel()
        v = np.array(self.value, dtype=float).ravel()
        if r.shape != v.shape:
            raise ValueError("r and value differ in length")
        if r.size > 1 and np.any(np.diff(r) <= 0):
            raise ValueError("r grid must be strictly increasing")
        if self.kind not in ("pcf", "F"):
            raise ValueError(f"unknown kind {self.kind!r}")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "value", v)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "value"])
            for a, b in zip(self.r, self.value):
                w.writerow([repr(float(a)), repr(float(b))])
        return path

    @classmethod
    def from_csv(cls, path, kind: str) -> "FunctionEstimate":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], kind)


@dataclass(frozen=True)
class SummaryVector:
    r1: float
    r2: float
    r3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3])

    def distance(self, other: "SummaryVector") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))


def default_pcf_grid(window: Window, size: int = PCF_GRID_SIZE) -> np.ndarray:
    """``size`` equally spaced distances on ``(0, width/4]``."""
    rmax = window.width / 4
    return np.linspace(rmax / size, rmax, size)


def default_F_grid(window: Window, size: int = PCF_GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, window.width / 4, size)


def default_bandwidth(pattern: PointPattern) -> float:
    """Stoyan's rule of thumb ``0.15 / sqrt(lambda_hat)``."""
    return 0.15 / math.sqrt(pattern.intensity)


def epanechnikov(u, bandwidth: float) -> np.ndarray:
    u = np.asarray(u, dtype=float) / bandwidth
    return np.where(np.abs(u) <= 1, 0.75 / bandwidth * (1 - u * u), 0.0)


def estimate_pcf(pattern: PointPattern, r=None, bandwidth: float | None = None) -> FunctionEstimate:
    """Kernel estimate of the pair correlation function.

    ``g(r) = sum_{i != j} k_b(r - d_ij) / (2 pi r lambda^2 A(x_i - x_j))``
    with ``lambda = n/|W|`` and ``A(v) = (w - |v_x|)(h - |v_y|)``.
    """
    pattern = check_pattern(pattern, min_points=2)
    win = pattern.window
    r = default_pcf_grid(win) if r is None else np.asarray(r, dtype=float).ravel()
    if r.size == 0 or np.any(r <= 0):
        raise ValueError("pcf grid must contain only positive distances")
    if np.any(np.diff(r) <= 0):
        raise ValueError("pcf grid must be strictly increasing")
    b = default_bandwidth(pattern) if bandwidth is None else float(bandwidth)
    if not b > 0:
        raise ValueError(f"bandwidth must be positive, got {b}")
    lam = pattern.intensity
    sums = _kernels.pcf_sums(
        np.ascontiguousarray(pattern.points), np.ascontiguousarray(r), b, win.width, win.height
    )
    return FunctionEstimate(r, sums / (2 * np.pi * r * lam * lam), "pcf")


def lattice(window: Window, spacing: float) -> np.ndarray:
    """Cell centres of a regular lattice with roughly the given spacing."""
    if not spacing > 0:
        raise ValueError(f"lattice spacing must be positive, got {spacing}")
    nx = max(1, int(round(window.width / spacing)))
    ny = max(1, int(round(window.height / spacing)))
    xs = (np.arange(nx) + 0.5) * (window.width / nx)
    ys = (np.arange(ny) + 0.5) * (window.height / ny)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def kaplan_meier_cdf(observed, censor, r) -> np.ndarray:
    """Kaplan-Meier distribution function at ``r`` for right-censored data.

    ``observed`` are the latent distances, ``censor`` the censoring
    distances; a location fails at ``observed`` if ``observed <= censor``.
    """
    observed = np.asarray(observed, dtype=float)
    censor = np.asarray(censor, dtype=float)
    t = np.minimum(observed, censor)
    event = observed <= censor
    r = np.ascontiguousarray(np.asarray(r, dtype=float))
    out = _kernels.product_limit(np.sort(t[event]), np.sort(t), r)
    return np.clip(out, 0.0, 1.0)


def estimate_F(pattern: PointPattern, r=None, lattice_spacing: float | None = None) -> FunctionEstimate:
    """Kaplan-Meier (border-censored) estimate of the empty space function.

    Test locations are the cell centres of a lattice with the given spacing
    (default ``width/256``). Each location's distance to the nearest point
    is censored by its distance to the window boundary.
    """
    pattern = check_pattern(pattern)
    if pattern.n == 0:
        raise PatternError("empty space function needs a non-empty pattern")
    win = pattern.window
    r = default_F_grid(win) if r is None else np.asarray(r, dtype=float).ravel()
    if r.size > 1 and np.any(np.diff(r) <= 0):
        raise ValueError("F grid must be strictly increasing")
    spacing = win.width / F_LATTICE_DIVISIONS if lattice_spacing is None else float(lattice_spacing)
    u = lattice(win, spacing)
    border = np.minimum.reduce([u[:, 0], win.width - u[:, 0], u[:, 1], win.height - u[:, 1]])
    cell = max(spacing, math.sqrt(win.area / pattern.n))
    d = _kernels.nn_distance(np.ascontiguousarray(pattern.points), u, win.width, win.height, cell)
    return FunctionEstimate(r, kaplan_meier_cdf(d, border, r), "F")


def pool_pcf(estimates, counts) -> FunctionEstimate:
    """Pool pcf estimates with weights proportional to squared point counts."""
    estimates = list(estimates)
    counts = np.asarray(counts, dtype=float)
    if not estimates:
        raise ValueError("nothing to pool")
    if counts.shape != (len(estimates),) or np.any(counts <= 0):
        raise ValueError("need one positive count per estimate")
    r = estimates[0].r
    for e in estimates[1:]:
        if e.r.shape != r.shape or not np.array_equal(e.r, r):
            raise ValueError("estimates must share the same r grid")
    w = counts**2
    values = np.stack([e.value for e in estimates])
    return FunctionEstimate(r, w @ values / w.sum(), estimates[0].kind)


def first_upcrossing(r, value, level: float, r_min: float = -np.inf) -> float:
    """Smallest ``r > r_min`` where ``value`` climbs through ``level``.

    Linear interpolation between the two bracketing grid points; both must
    lie beyond ``r_min``. Returns ``nan`` if there is no such crossing.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(value, dtype=float)
    keep = r > r_min
    r, v = r[keep], v[keep]
    hits = np.flatnonzero((v[:-1] < level) & (v[1:] >= level))
    if hits.size == 0:
        return float("nan")
    k = hits[0]
    r0, r1, v0, v1 = r[k], r[k + 1], v[k], v[k + 1]
    return float(r0 + (level - v0) / (v1 - v0) * (r1 - r0))


def abc_summaries(
    pattern: PointPattern,
    pcf_grid=None,
    F_grid=None,
    lattice_spacing: float | None = None,
) -> SummaryVector:
    """``(r1, r2, r3)``: first distances beyond 10 px where the pcf reaches
    0.75 and 1, and first distance where F reaches 0.5.

    Raises :class:`UndefinedSummaryError` if a level is never reached.
    """
    pattern = check_pattern(pattern)
    if pattern.n < 2:
        raise UndefinedSummaryError("pcf needs at least 2 points")
    g = estimate_pcf(pattern, pcf_grid)
    r1 = first_upcrossing(g.r, g.value, R1_LEVEL, MIN_SUMMARY_DISTANCE)
    r2 = first_upcrossing(g.r, g.value, R2_LEVEL, MIN_SUMMARY_DISTANCE)
    if math.isnan(r1) or math.isnan(r2):
        raise UndefinedSummaryError("pcf never climbs through 0.75 and 1 beyond 10 px")
    F = estimate_F(pattern, F_grid, lattice_spacing)
    r3 = first_upcrossing(F.r, F.value, R3_LEVEL)
    if math.isnan(r3):
        raise UndefinedSummaryError("F never reaches 0.5 on the grid")
    return SummaryVector(r1, r2, r3)


# --------------------------------------------------------------------------
# scikit-learn style wrappers: one pattern in, one row out


class PairCorrelationTransformer(TransformerMixin, BaseEstimator):
    """Map each pattern to its pcf estimate on a fixed grid.

    Parameters
    ----------
    r : array-like, optional
        Distance grid; defaults to 512 points on ``(0, width/4]`` of the
        first fitted pattern's window.
    bandwidth : float, optional
        Fixed kernel bandwidth; default is per-pattern ``0.15/sqrt(lambda)``.
    window : Window or (width, height), optional
        Used when patterns are given as bare coordinate arrays.
    """

    def __init__(self, r=None, bandwidth=None, window=None):
        self.r = r
        self.bandwidth = bandwidth
        self.window = window

    def fit(self, X, y=None):
        patterns = check_patterns(X, self.window, min_points=2)
        self.r_ = default_pcf_grid(patterns[0].window) if self.r is None else np.asarray(self.r, float)
        return self

    def transform(self, X):
        if not hasattr(self, "r_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("call fit before transform")
        patterns = check_patterns(X, self.window, min_points=2)
        return np.stack([estimate_pcf(p, self.r_, self.bandwidth).value for p in patterns])


class SummaryStatistics(TransformerMixin, BaseEstimator):
    """Map each pattern to ``(r1, r2, r3)``; undefined rows become NaN."""

    def __init__(self, lattice_spacing=None, window=None):
        self.lattice_spacing = lattice_spacing
        self.window = window

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows = []
        for p in check_patterns(X, self.window):
            try:
                rows.append(abc_summaries(p, lattice_spacing=self.lattice_spacing).as_array())
            except UndefinedSummaryError:
                rows.append(np.full(3, np.nan))
        return np.vstack(rows)

    def get_feature_names_out(self, input_features=None):
        return np.array(["r1", "r2", "r3"], dtype=object)
