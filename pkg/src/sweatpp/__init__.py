"""Spatial point process models of sweat gland activation.

Sequential soft-core and generative (thinned disturbed SSI) models, their
likelihood, Bayesian and ABC fitting, global envelope tests, and extraction
of ordered point patterns from video frames.
"""
from importlib.metadata import PackageNotFoundError, version

from .core import (
    PatternError,
    PointPattern,
    QuadratureScheme,
    Window,
    make_regular_quadrature,
    read_pattern,
    write_pattern,
)
from .generative import GenerativeParams, simulate_generative, simulate_ssi
from .rng import RandomStreams, seed_rng
from .sequential import (
    MixtureParams,
    SoftcoreParams,
    log_normalizer_series,
    mixture_loglik,
    seq_loglik,
    simulate_mixture,
    simulate_sequential,
)
from .summaries import FunctionEstimate, SummaryVector, abc_summaries, estimate_F, estimate_pcf

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "FunctionEstimate",
    "GenerativeParams",
    "MixtureParams",
    "PatternError",
    "PointPattern",
    "QuadratureScheme",
    "RandomStreams",
    "SoftcoreParams",
    "SummaryVector",
    "Window",
    "abc_summaries",
    "estimate_F",
    "estimate_pcf",
    "log_normalizer_series",
    "make_regular_quadrature",
    "mixture_loglik",
    "read_pattern",
    "seed_rng",
    "seq_loglik",
    "simulate_generative",
    "simulate_mixture",
    "simulate_sequential",
    "simulate_ssi",
    "write_pattern",
]
