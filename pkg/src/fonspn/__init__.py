"""Fractional-order normalized subband p-norm (FoNSPN) adaptive filtering."""

from .adaptive import (
    AlgoConfig,
    Algorithm,
    FilterState,
    fractional_power_derivative,
    gain,
    nsaf_update,
    nspn_update,
    subband_errors,
    update,
)
from .filterbank import FilterBank, SubbandFrame, analyze, design_bank
from .harness import ExperimentConfig, NmsdTrace, run_experiment, run_trial, steady_state_msd_empirical
from .signalgen import AlphaStableParams, Ar1Params, GaussianParams, color_ar1, sample_gaussian, sample_sas
from .theory import SubbandMoments, beta_range, estimate_moments, step_size_bound, steady_state_msd

__version__ = "0.1.0"
