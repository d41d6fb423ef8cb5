"""Zero-order gradient estimation: oracles, finite differences, and minimax bounds."""
from .bounds import (
    RateInputs,
    bernoulli_kl,
    fano_error_floor,
    fdm_gaussian_exact,
    fdm_upper_bound,
    folded_gaussian_mean,
    gaussian_fdm_error_at_h,
    kl_transcript_bound,
    lower_bound_minimax,
)
from .estimators import (
    FdmConfig,
    FiniteDifferenceEstimator,
    GradientEstimate,
    PackingDecoder,
    boundary_step,
    decode_alpha,
    fdm_estimate,
    optimal_step_chebyshev,
    optimal_step_gaussian,
)
from .funcspace import CubicFunction, CustomFunction, DomainBox, HyperplaneFunction, taylor_central_difference
from .oracles import AdversarialBernoulliOracle, BudgetExhausted, CustomOracle, GaussianOracle, make_rng, variance_cap
from .packing import PackingSet, build_packing, hamming, min_discrepancy_psi

__all__ = [
    "AdversarialBernoulliOracle",
    "BudgetExhausted",
    "CubicFunction",
    "CustomFunction",
    "CustomOracle",
    "DomainBox",
    "FdmConfig",
    "FiniteDifferenceEstimator",
    "GaussianOracle",
    "GradientEstimate",
    "HyperplaneFunction",
    "PackingDecoder",
    "PackingSet",
    "RateInputs",
    "bernoulli_kl",
    "boundary_step",
    "build_packing",
    "decode_alpha",
    "fano_error_floor",
    "fdm_estimate",
    "fdm_gaussian_exact",
    "fdm_upper_bound",
    "folded_gaussian_mean",
    "gaussian_fdm_error_at_h",
    "hamming",
    "kl_transcript_bound",
    "lower_bound_minimax",
    "make_rng",
    "min_discrepancy_psi",
    "optimal_step_chebyshev",
    "optimal_step_gaussian",
    "taylor_central_difference",
    "variance_cap",
]

__version__ = "0.1.0"
