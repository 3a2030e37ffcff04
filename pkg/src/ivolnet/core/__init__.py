"""Domain types, estimator configuration, and the functional algebra."""

from .config import EstimatorConfig, SECONDS_PER_YEAR, step_from_minutes, step_from_seconds
from .functionals import (
    Functional,
    beta_loading,
    constant,
    functional_compose,
    functional_gradient,
    functional_value,
    idio_cov,
    idiovol,
    selector,
)
from .panel import ReturnPanel
from .paths import SpotCovPath, VolJumpMask

__all__ = [
    "EstimatorConfig",
    "SECONDS_PER_YEAR",
    "step_from_minutes",
    "step_from_seconds",
    "Functional",
    "beta_loading",
    "constant",
    "functional_compose",
    "functional_gradient",
    "functional_value",
    "idio_cov",
    "idiovol",
    "selector",
    "ReturnPanel",
    "SpotCovPath",
    "VolJumpMask",
]
