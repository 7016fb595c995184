"""Bayesian Dawid-Skene models for categorical rating data."""

__version__ = "0.1.0"

from raterfit.dataset import (  # noqa: E402
    GroupedRatings,
    LongRatings,
    WideRatings,
    bundled,
    convert,
    read,
    to_grouped,
    to_long,
    to_wide,
)
from raterfit.errors import (  # noqa: E402
    ArchiveError,
    DomainError,
    InitError,
    NumericalError,
    ParseError,
    RaterError,
    ShapeError,
    StateError,
    UnsupportedError,
)
from raterfit.likelihood import CcParams, DsParams, HdsParams, log_likelihood, log_posterior  # noqa: E402
from raterfit.mcmc import SamplerConfig  # noqa: E402
from raterfit.model import ModelSpec, resolve_spec  # noqa: E402
from raterfit.optimize import em_fit, gradient_map_fit, map_fit  # noqa: E402
from raterfit.posterior import (  # noqa: E402
    class_probabilities,
    conditional_z,
    point_estimate,
    posterior_interval,
    posterior_predict,
    waic,
)
from raterfit.results import FitResult, fit, load, save  # noqa: E402

__all__ = [
    "__version__",
    "LongRatings", "WideRatings", "GroupedRatings", "read", "convert", "to_long", "to_wide", "to_grouped", "bundled",
    "RaterError", "ParseError", "DomainError", "ShapeError", "UnsupportedError", "NumericalError", "StateError",
    "InitError", "ArchiveError",
    "DsParams", "CcParams", "HdsParams", "log_likelihood", "log_posterior",
    "ModelSpec", "resolve_spec", "SamplerConfig",
    "em_fit", "gradient_map_fit", "map_fit",
    "conditional_z", "class_probabilities", "point_estimate", "posterior_interval", "posterior_predict", "waic",
    "FitResult", "fit", "save", "load",
]
