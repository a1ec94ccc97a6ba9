"""Bayesian structural VARs identified through Markov-switching heteroskedasticity."""

from .config import load_csv, load_config, write_csv
from .gibbs import DrawStore, SamplerConfig, run_chain, run_sampler
from .identification import brute_force_alternatives, check_identification, verify_decomposition
from .inference import (
    estimate_mdd,
    nse_batch_means,
    sddr_homoskedasticity,
    sddr_joint_homoskedasticity,
    sddr_joint_identification,
    sddr_pair_identification,
)
from .model import (
    ModelParameters,
    PriorHyperparameters,
    StateSequence,
    TimeSeriesData,
    build_design,
    log_likelihood,
    marginal_log_likelihood,
    simulate_data,
)
from .restrictions import RestrictionScheme, preset, scheme_from_pattern
from .store import load_store, save_store

__version__ = "0.1.0"

__all__ = [
    "DrawStore",
    "ModelParameters",
    "PriorHyperparameters",
    "RestrictionScheme",
    "SamplerConfig",
    "StateSequence",
    "TimeSeriesData",
    "brute_force_alternatives",
    "build_design",
    "check_identification",
    "estimate_mdd",
    "load_config",
    "load_csv",
    "load_store",
    "log_likelihood",
    "marginal_log_likelihood",
    "nse_batch_means",
    "preset",
    "run_chain",
    "run_sampler",
    "save_store",
    "scheme_from_pattern",
    "sddr_homoskedasticity",
    "sddr_joint_homoskedasticity",
    "sddr_joint_identification",
    "sddr_pair_identification",
    "simulate_data",
    "verify_decomposition",
    "write_csv",
]
