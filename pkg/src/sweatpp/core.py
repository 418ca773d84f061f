"""Point patterns, windows, quadrature and pattern file I/O.

All coordinates are in pixels with the window origin at (0, 0).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

# Camera frame of the sweat test: 2592 x 1944 px covering 17.5 x 13 mm.
# Reporting only; nothing internal converts units.
MM_PER_PIXEL = 17.5 / 2592
DEFAULT_WIDTH = 2592.0
DEFAULT_HEIGHT = 1944.0


class PatternError(ValueError):
    """Raised for invalid point patterns (points outside window, NaNs, ...)."""


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle ``[0, width] x [0, height]``."""

    width: float = DEFAULT_WIDTH
    height: float = DEFAULT_HEIGHT

    def __post_init__(self):
        w, h = float(self.width), float(self.height)
        if not (math.isfinite(w) and math.isfinite(h)) or w <= 0 or h <= 0:
            raise ValueError(f"window sides must be positive and finite, got {w} x {h}")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, xy) -> np.ndarray:
        """Boolean mask of rows of ``xy`` inside the closed window."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return (
            (xy[:, 0] >= 0) & (xy[:, 0] <= self.width)
            & (xy[:, 1] >= 0) & (xy[:, 1] <= self.height)
        )

    def dilate(self, margin: float) -> tuple["Window", float]:
        """Window grown by ``margin`` on every side, plus the shift to apply
        to coordinates of the original window."""
        return Window(self.width + 2 * margin, self.height + 2 * margin), margin


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointPattern:
    """Ordered planar point pattern; row ``i`` is the ``i+1``-th arrival.

    Construction does not check that points lie in the window, so that
    intermediate results (e.g. disturbed points) can be represented; call
    :func:`validate_pattern` where containment matters.
    """

    points: np.ndarray
    window: Window = field(default_factory=Window)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise PatternError(f"points must have shape (n, 2), got {pts.shape}")
        object.__setattr__(self, "points", _readonly(pts))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def intensity(self) -> float:
        return self.n / self.window.area

    def subset(self, mask_or_index) -> "PointPattern":
        return PointPattern(self.points[mask_or_index], self.window)


@dataclass(frozen=True)
class QuadratureScheme:
    """Integration nodes ``(J, 2)`` and positive weights summing to ``|W|``."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes and weights differ in length")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "weights", _readonly(weights))

    def __len__(self) -> int:
        return self.weights.shape[0]


def grid_shape(window: Window, target_count: int) -> tuple[int, int]:
    """Columns and rows of a regular grid with about ``target_count`` cells.

    Among grids whose cell count is within a factor 1.2 of the target, the
    one whose cells are closest to square wins; ties go to the count closest
    to the target.
    """
    target_count = int(target_count)
    if target_count < 1:
        raise ValueError(f"target_count must be >= 1, got {target_count}")
    nx = np.arange(1, target_count + 1)
    ny = np.maximum(1, np.rint(target_count / nx)).astype(int)
    total = nx * ny
    ok = (total <= 1.2 * target_count) & (total * 1.2 >= target_count)
    aspect = window.width / window.height
    shape_err = np.abs(np.log((nx / ny) / aspect))
    count_err = np.abs(np.log(total / target_count))
    cand = np.flatnonzero(ok)
    best = cand[np.lexsort((count_err[cand], np.round(shape_err[cand], 12)))[0]]
    return int(nx[best]), int(ny[best])


def make_regular_quadrature(window: Window, target_count: int = 10_800) -> QuadratureScheme:
    """Midpoint rule on a regular grid covering ``window``.

    The 2592 x 1944 camera window with the default 10,800 nodes gives an exact
    120 x 90 grid.
    """
    nx, ny = grid_shape(window, target_count)
    dx, dy = window.width / nx, window.height / ny
    xs = (np.arange(nx) + 0.5) * dx
    ys = (np.arange(ny) + 0.5) * dy
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    weights = np.full(nodes.shape[0], window.area / (nx * ny))
    return QuadratureScheme(nodes, weights)


def validate_pattern(pattern: PointPattern) -> PointPattern:
    """Return ``pattern`` if every point is finite and inside its window."""
    pts = pattern.points
    bad_finite = np.flatnonzero(~np.isfinite(pts).all(axis=1))
    if bad_finite.size:
        raise PatternError(f"non-finite coordinates at indices {bad_finite.tolist()}")
    outside = np.flatnonzero(~pattern.window.contains(pts))
    if outside.size:
        raise PatternError(
            f"points outside the {pattern.window.width:g} x {pattern.window.height:g} "
            f"window at indices {outside.tolist()}"
        )
    return pattern


def pairwise_min_distance(pattern: PointPattern) -> float:
    """Smallest distance between two distinct points of ``pattern``."""
    if pattern.n < 2:
        raise PatternError("need at least 2 points for a pairwise distance")
    d, _ = cKDTree(pattern.points).query(pattern.points, k=2)
    return float(d[:, 1].min())


def binomial_pattern(n: int, window: Window, rng: np.random.Generator) -> PointPattern:
    """``n`` independent uniform points in ``window``."""
    u = rng.random((int(n), 2))
    return PointPattern(u * [window.width, window.height], window)


# --------------------------------------------------------------------------
# file format: CSV ``index,x,y`` plus sidecar ``<stem>.window.json``


def window_sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".window.json")


def write_pattern(pattern: PointPattern, path, sidecar: bool = True) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "x", "y"])
        for i, (x, y) in enumerate(pattern.points, start=1):
            w.writerow([i, repr(float(x)), repr(float(y))])
    if sidecar:
        with open(window_sidecar(path), "w") as fh:
            json.dump({"width": pattern.window.width, "height": pattern.window.height}, fh)
            fh.write("\n")
    return path


def read_pattern(path, window: Window | None = None, validate: bool = True) -> PointPattern:
    """Read a pattern CSV.

    The window comes from ``window`` if given, else from the sidecar JSON.
    A sidecar may carry ``x0``/``y0`` offsets; coordinates are translated so
    the window starts at the origin. Rows are sorted by their ``index``
    column (arrival order).
    """
    path = Path(path)
    offset = np.zeros(2)
    if window is None:
        side = window_sidecar(path)
        if not side.exists():
            raise FileNotFoundError(
                f"no window given and sidecar {side.name} not found; pass width/height"
            )
        meta = json.loads(side.read_text())
        window = Window(meta["width"], meta["height"])
        offset = np.array([meta.get("x0", 0.0), meta.get("y0", 0.0)], dtype=float)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"index", "x", "y"} <= set(reader.fieldnames):
            raise PatternError(f"{path}: expected header 'index,x,y'")
        for row in reader:
            rows.append((int(row["index"]), float(row["x"]), float(row["y"])))
    rows.sort(key=lambda r: r[0])
    idx = [r[0] for r in rows]
    if idx != list(range(1, len(rows) + 1)):
        raise PatternError(f"{path}: index column must be 1..n without gaps")
    pts = np.array([[r[1], r[2]] for r in rows], dtype=float).reshape(-1, 2) - offset
    pattern = PointPattern(pts, window)
    return validate_pattern(pattern) if validate else pattern
