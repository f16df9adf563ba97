"""Nonparametric spectral estimation of Levy measures from equidistant increments."""

__version__ = "0.1.0"

from .errors import NumericalGuardError, ValidationError
from .models import (
    AssumptionReport,
    Exponential,
    Kind,
    LevyModel,
    Normal,
    Uniform,
    char_exponent_deriv,
    char_fn,
    char_fn_deriv,
    check_assumptions,
    levy_moment,
    levy_tail,
    sample_increments,
)
from .spectral import (
    BandKernel,
    SpectralData,
    clipped_phi,
    ecf,
    ecf_deriv,
    flat_top_kernel,
    frequency_grid,
    invert_kernel,
    log_deriv_ratio,
)
from .estimator import (
    EstimateConfig,
    EstimateResult,
    estimate,
    estimate_spectral,
    estimate_xspace,
    eval_Fg,
    eval_Fg_quad,
)
from .covariance import (
    CovarianceMatrix,
    covariance_plugin,
    gamma_sigma_closed_form,
    h_fn_plugin,
    oracle_covariance,
)
from .montecarlo import (
    ExperimentConfig,
    ExperimentReport,
    coverage,
    ks_statistic,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
