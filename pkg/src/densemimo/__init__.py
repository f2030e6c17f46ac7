"""Closed-form performance bounds for dense Massive MIMO networks.

`pathloss` defines the multi-slope attenuation model, `analytics` the
closed-form estimation-error and spectral-efficiency expressions,
`simulator` the Monte Carlo machinery that validates them, `specfun`
the special functions both sides share, and `cli` the command-line
front end.
"""

from .analytics import (
    DivergentCoefficientError,
    MuCoefficients,
    NetworkParams,
    SingularExponentError,
    SinrBreakdown,
    area_se,
    big_a,
    crossover_antenna_ratio,
    mu_coefficient,
    nmse_bound,
    optimal_zeta_asymptotic,
    optimal_zeta_exhaustive,
    rate_asymptotic,
    se_lower_bound,
    sinr_mr,
    sinr_zf,
)
from .pathloss import (
    PathLossModel,
    beta,
    dump_model,
    load_model,
    make_dual_slope_default,
    make_single_slope,
)
from .simulator import (
    CellStallError,
    NetworkRealization,
    SimConfig,
    TrialStats,
    config_for_density,
    drop_ues,
    estimate_mu,
    estimate_nmse,
    estimate_uatf_sinr,
    generate_network,
    nmse_from_gain_ratios,
    uatf_terms_for_layout,
)

__version__ = "0.1.0"

__all__ = [
    "PathLossModel",
    "beta",
    "load_model",
    "dump_model",
    "make_single_slope",
    "make_dual_slope_default",
    "NetworkParams",
    "MuCoefficients",
    "SinrBreakdown",
    "SingularExponentError",
    "DivergentCoefficientError",
    "mu_coefficient",
    "big_a",
    "nmse_bound",
    "sinr_mr",
    "sinr_zf",
    "se_lower_bound",
    "rate_asymptotic",
    "optimal_zeta_asymptotic",
    "optimal_zeta_exhaustive",
    "crossover_antenna_ratio",
    "area_se",
    "SimConfig",
    "NetworkRealization",
    "TrialStats",
    "CellStallError",
    "config_for_density",
    "generate_network",
    "drop_ues",
    "nmse_from_gain_ratios",
    "estimate_mu",
    "estimate_nmse",
    "estimate_uatf_sinr",
    "uatf_terms_for_layout",
    "__version__",
]
