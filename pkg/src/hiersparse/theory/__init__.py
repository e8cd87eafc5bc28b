"""Simulation bench for the probabilistic claims behind hierarchical penalties."""
from .moments import (
    CONSTANTS_BANNER,
    ConcentrationReport,
    REProbe,
    a0_event_rate,
    centered_exponential,
    concentration_squares_check,
    population_mean_z,
    psi_norm_estimate,
    q1n_q2n,
    re_probe,
    sigma_z_eigs,
    weight_matrix,
)
from .rate import ExperimentConfig, RateBound, rate_bound_check, rate_experiment, rows_to_csv, summarize
from .restricted import REEstimate, epsilon_limit, re_constant, re_ratio, re_sample_size, sample_size_m1
from .sampling import (
    AssumptionWarning,
    DesignDistribution,
    column_sd,
    gaussian_psi2,
    gen_design,
    gen_noise,
    gen_truth,
    noise_psi2,
)
