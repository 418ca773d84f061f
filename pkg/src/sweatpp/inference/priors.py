"""Independent one-dimensional priors and their products."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


class Distribution:
    """Interface shared by the prior families."""

    proper = True

    def logpdf(self, x: float) -> float:
        raise NotImplementedError

    def in_support(self, x: float) -> bool:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def scale_hint(self) -> float:
        """Interquartile range, used to size initial proposal steps."""
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("gamma shape and scale must be positive")

    def logpdf(self, x):
        if not x > 0:
            return -math.inf
        return float(stats.gamma.logpdf(x, self.shape, scale=self.scale))

    def in_support(self, x):
        return x > 0 and math.isfinite(x)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)

    def cdf(self, x):
        return stats.gamma.cdf(x, self.shape, scale=self.scale)

    def scale_hint(self):
        q = stats.gamma.ppf([0.25, 0.75], self.shape, scale=self.scale)
        return float(q[1] - q[0])

    def to_dict(self):
        return {"family": "gamma", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Uniform(Distribution):
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("uniform prior needs low < high")

    def logpdf(self, x):
        if self.in_support(x):
            return -math.log(self.high - self.low)
        return -math.inf

    def in_support(self, x):
        return self.low <= x <= self.high

    def sample(self, rng, size=None):
        return rng.uniform(self.low, self.high, size)

    def cdf(self, x):
        return np.clip((np.asarray(x, float) - self.low) / (self.high - self.low), 0, 1)

    def scale_hint(self):
        return 0.5 * (self.high - self.low)

    def to_dict(self):
        return {"family": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class ImproperUniform(Distribution):
    """Flat density on ``[low, inf)``; cannot be sampled."""

    low: float
    #: proposal step hint; there is no interquartile range to take 10 % of
    step: float = 100.0

    proper = False

    def logpdf(self, x):
        return 0.0 if self.in_support(x) else -math.inf

    def in_support(self, x):
        return self.low <= x < math.inf

    def sample(self, rng, size=None):
        raise ValueError("cannot sample from an improper prior")

    def scale_hint(self):
        return self.step

    def to_dict(self):
        return {"family": "improper_uniform", "low": self.low}


@dataclass(frozen=True)
class PointMass(Distribution):
    """Degenerate prior; the parameter is held fixed by the samplers."""

    value: float

    def logpdf(self, x):
        return 0.0 if x == self.value else -math.inf

    def in_support(self, x):
        return x == self.value

    def sample(self, rng, size=None):
        return np.full(size, self.value) if size is not None else self.value

    def cdf(self, x):
        return (np.asarray(x, float) >= self.value).astype(float)

    def scale_hint(self):
        return 0.0

    def to_dict(self):
        return {"family": "point_mass", "value": self.value}


_FAMILIES = {
    "gamma": lambda d: Gamma(d["shape"], d["scale"]),
    "uniform": lambda d: Uniform(d["low"], d["high"]),
    "improper_uniform": lambda d: ImproperUniform(d["low"]),
    "point_mass": lambda d: PointMass(d["value"]),
}


class Prior:
    """Product of independent named marginals, in parameter order."""

    def __init__(self, **marginals: Distribution):
        if not marginals:
            raise ValueError("a prior needs at least one parameter")
        self.marginals = dict(marginals)

    @property
    def names(self) -> list[str]:
        return list(self.marginals)

    @property
    def dim(self) -> int:
        return len(self.marginals)

    @property
    def proper(self) -> bool:
        return all(m.proper for m in self.marginals.values())

    def in_support(self, x) -> bool:
        return all(m.in_support(float(v)) for m, v in zip(self.marginals.values(), x))

    def logpdf(self, x) -> float:
        total = 0.0
        for m, v in zip(self.marginals.values(), x):
            total += m.logpdf(float(v))
            if total == -math.inf:
                break
        return total

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([float(m.sample(rng)) for m in self.marginals.values()])

    def fixed_mask(self) -> np.ndarray:
        return np.array([isinstance(m, PointMass) for m in self.marginals.values()])

    def initial_scales(self, fraction: float = 0.1) -> np.ndarray:
        """``fraction`` of each marginal's interquartile range (10 % of the
        step hint for improper marginals)."""
        return np.array([fraction * m.scale_hint() for m in self.marginals.values()])

    def to_dict(self) -> dict:
        return {k: m.to_dict() for k, m in self.marginals.items()}

    @classmethod
    def from_dict(cls, config: dict) -> "Prior":
        return cls(**{k: _FAMILIES[v["family"]](v) for k, v in config.items()})

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.marginals.items())
        return f"Prior({inner})"


def mixture_prior() -> Prior:
    """Priors used for the Bayesian soft-core-plus-noise fit."""
    return Prior(R=Gamma(3.0, 70.0 / 3.0), kappa=Uniform(0.0, 1.0), theta=Uniform(0.0, 1.0))


def generative_prior() -> Prior:
    """Priors used for the ABC fit of the generative model."""
    return Prior(R=ImproperUniform(40.0), sigma=Gamma(10.0 / 3.0, 3.0), p=Uniform(0.1, 1.0))
