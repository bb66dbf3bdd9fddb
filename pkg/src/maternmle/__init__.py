"""Exact maximum-likelihood estimation for stationary Gaussian random
fields with Matern covariance: stable order-derivatives of K_nu, a dense
Cholesky likelihood/gradient/Fisher pipeline, a Fisher-scoring optimizer
with backtracking and Nelder-Mead fallback, and a simulation/benchmark CLI.
"""

from .bessel import (
    BesselRegime,
    MidRangeSmallOrderWarning,
    bessel_k,
    case2_series,
    case3_series,
    case4_series,
    digamma,
    dnu_xnu_knu,
    select_regime,
    u_poly_coeffs,
)
from .likelihood import (
    LikelihoodEval,
    NotPositiveDefinite,
    cholesky_lower,
    grad_and_fisher,
    log_likelihood,
    trace_product,
)
from .matern import (
    MaternParams,
    SpatialDataset,
    build_cov_matrix,
    build_dcov_matrix,
    dcov_dalpha,
    dcov_dnu,
    dcov_dsigma2,
    matern_cov,
)
from .optimizer import (
    FisherBTConfig,
    InitializationFailed,
    LikelihoodObjective,
    OptResult,
    SingularInformation,
    Termination,
    armijo_relaxed,
    fisher_bt,
    fisher_step,
    l9_candidates,
    nelder_mead,
    select_initial,
)
from .simulate import (
    GENERATOR_ID,
    LocationScheme,
    PlanError,
    SimulationPlan,
    gen_locations,
    microergodic,
    replicate_seed,
    simulate_grf,
)

__version__ = "0.1.0"

__all__ = [
    "BesselRegime",
    "MidRangeSmallOrderWarning",
    "bessel_k",
    "case2_series",
    "case3_series",
    "case4_series",
    "digamma",
    "dnu_xnu_knu",
    "select_regime",
    "u_poly_coeffs",
    "LikelihoodEval",
    "NotPositiveDefinite",
    "cholesky_lower",
    "grad_and_fisher",
    "log_likelihood",
    "trace_product",
    "MaternParams",
    "SpatialDataset",
    "build_cov_matrix",
    "build_dcov_matrix",
    "dcov_dalpha",
    "dcov_dnu",
    "dcov_dsigma2",
    "matern_cov",
    "FisherBTConfig",
    "InitializationFailed",
    "LikelihoodObjective",
    "OptResult",
    "SingularInformation",
    "Termination",
    "armijo_relaxed",
    "fisher_bt",
    "fisher_step",
    "l9_candidates",
    "nelder_mead",
    "select_initial",
    "GENERATOR_ID",
    "LocationScheme",
    "PlanError",
    "SimulationPlan",
    "gen_locations",
    "microergodic",
    "replicate_seed",
    "simulate_grf",
    "__version__",
]
