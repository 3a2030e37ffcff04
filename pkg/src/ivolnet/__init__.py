"""Covariation of spot-volatility functionals from high-frequency panels.

The package estimates how the volatilities of assets co-move: spot
covariance paths from truncated local windows, bias-corrected estimators
of the covariation between smooth functionals of those paths (such as
idiosyncratic variances), asymptotic variances and tests, factor models
for the idiosyncratic variances themselves, and a Monte Carlo harness
that validates everything against latent simulated ground truth.
"""

from .avar import AvarMatrix, delta_method_var, omega_terms, sigma_entry, sigma_matrix
from .core import (
    EstimatorConfig,
    Functional,
    ReturnPanel,
    SpotCovPath,
    VolJumpMask,
    beta_loading,
    constant,
    functional_compose,
    functional_gradient,
    functional_value,
    idio_cov,
    idiovol,
    selector,
    step_from_minutes,
    step_from_seconds,
)
from .factors import (
    IdioVolModelSpec,
    PairAnalysis,
    analyze_pair,
    corr_idio_returns,
    corr_idiovol,
    corr_resid,
    gamma_loadings,
    integrated_r2_rfm,
    q_measure,
    r2_idiovolfm,
    resid_quadcov,
    spec_for_panel,
)
from .inference import FdrResult, TestResult, fdr_bh, t_test_quadcov, wald_test
from .quadcov import PathWorkspace, QuadCovEstimate, qc_an, qc_lin, qc_naive
from .spot import (
    TruncationThresholds,
    bipower_sigma2,
    compute_thresholds,
    detect_vol_jump_events,
    estimate_spot_path,
)

__version__ = "0.1.0"

__all__ = [
    "AvarMatrix",
    "delta_method_var",
    "omega_terms",
    "sigma_entry",
    "sigma_matrix",
    "EstimatorConfig",
    "Functional",
    "ReturnPanel",
    "SpotCovPath",
    "VolJumpMask",
    "beta_loading",
    "constant",
    "functional_compose",
    "functional_gradient",
    "functional_value",
    "idio_cov",
    "idiovol",
    "selector",
    "step_from_minutes",
    "step_from_seconds",
    "IdioVolModelSpec",
    "PairAnalysis",
    "analyze_pair",
    "corr_idio_returns",
    "corr_idiovol",
    "corr_resid",
    "gamma_loadings",
    "integrated_r2_rfm",
    "q_measure",
    "r2_idiovolfm",
    "resid_quadcov",
    "spec_for_panel",
    "FdrResult",
    "TestResult",
    "fdr_bh",
    "t_test_quadcov",
    "wald_test",
    "PathWorkspace",
    "QuadCovEstimate",
    "qc_an",
    "qc_lin",
    "qc_naive",
    "TruncationThresholds",
    "bipower_sigma2",
    "compute_thresholds",
    "detect_vol_jump_events",
    "estimate_spot_path",
]
