"""Input validation helpers shared by the estimators and functions."""
from __future__ import annotations

import numbers

import numpy as np

from .core import PatternError, PointPattern, Window, validate_pattern


def check_random_state(seed) -> np.random.Generator:
    """Turn ``seed`` into a ``numpy.random.Generator``.

    ``None`` gives a fresh unseeded generator, an integer a seeded one, and a
    ``Generator`` is passed through untouched (so callers share the stream).
    """
    if seed is None:
        return np.random.default_rng()
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, numbers.Integral):
        return np.random.default_rng(int(seed))
    raise ValueError(f"{seed!r} cannot be used to seed a numpy Generator")


def check_window(window) -> Window:
    if window is None:
        return Window()
    if isinstance(window, Window):
        return window
    w, h = window
    return Window(w, h)


def check_pattern(X, window=None, min_points: int = 0, validate: bool = True) -> PointPattern:
    """Coerce ``X`` (a :class:`PointPattern` or an ``(n, 2)`` array) to a
    validated pattern with at least ``min_points`` points."""
    if isinstance(X, PointPattern):
        pattern = X if window is None else PointPattern(X.points, check_window(window))
    else:
        pattern = PointPattern(np.asarray(X, dtype=float), check_window(window))
    if validate:
        validate_pattern(pattern)
    if pattern.n < min_points:
        raise PatternError(f"need at least {min_points} points, got {pattern.n}")
    return pattern


def check_patterns(X, window=None, min_points: int = 0) -> list[PointPattern]:
    """Like :func:`check_pattern` for a single pattern or a list of them."""
    if isinstance(X, PointPattern):
        return [check_pattern(X, window, min_points)]
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [check_pattern(X, window, min_points)]
    return [check_pattern(x, window, min_points) for x in X]


def check_probability(name: str, value: float, lo_open=False, hi_open=False) -> float:
    value = float(value)
    lo_ok = value > 0 if lo_open else value >= 0
    hi_ok = value < 1 if hi_open else value <= 1
    if not (lo_ok and hi_ok):
        lo = "(" if lo_open else "["
        hi = ")" if hi_open else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value
