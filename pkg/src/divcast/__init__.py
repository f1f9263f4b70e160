"""Forecast combination with time-varying weights estimated by particle
filtering, including a diversity-driven latent process, classical baselines
(equal weighting, recursive and rolling BMA), proper-score evaluation, and
synthetic benchmark generators."""

from .combine import CombinerResult, bma_weights, model_log_predictive, run_combiner, single_model_result
from .core import (
    ConfigError,
    DataFormatError,
    DegeneracyError,
    ForecastSeries,
    InputError,
    NoiseConfig,
    ObservationSeries,
    PredictorPanel,
    combined_point,
    default_sigma_obs,
    log_likelihood,
    softmax_link,
    weights_from_latent,
)
from .dgp import SimSpec, gen_complete_ar, gen_nonlinear_incomplete, generate
from .diversity import diversity_vector, scaled_diversity
from .filtering import FilterOutput, FilterState, ParticleFilter, run_filter, systematic_resample
from .latent import (
    ADAPTIVE_TVW,
    DTVW,
    TVW,
    LatentMode,
    LatentParticle,
    ParticleCloud,
    init_particles,
    propagate_particle,
    theta_from_alpha,
)
from .metrics import DMResult, crps_from_draws, dm_test, log_score, rmsfe, score_forecasts
from .tune import GridSpec, grid_search, make_crps_runner

__version__ = "0.1.0"

__all__ = [
    "ADAPTIVE_TVW",
    "DTVW",
    "TVW",
    "CombinerResult",
    "ConfigError",
    "DMResult",
    "DataFormatError",
    "DegeneracyError",
    "FilterOutput",
    "FilterState",
    "ForecastSeries",
    "GridSpec",
    "InputError",
    "LatentMode",
    "LatentParticle",
    "NoiseConfig",
    "ObservationSeries",
    "ParticleCloud",
    "ParticleFilter",
    "PredictorPanel",
    "SimSpec",
    "bma_weights",
    "combined_point",
    "crps_from_draws",
    "default_sigma_obs",
    "diversity_vector",
    "dm_test",
    "gen_complete_ar",
    "gen_nonlinear_incomplete",
    "generate",
    "grid_search",
    "init_particles",
    "log_likelihood",
    "log_score",
    "make_crps_runner",
    "model_log_predictive",
    "propagate_particle",
    "rmsfe",
    "run_combiner",
    "run_filter",
    "score_forecasts",
    "single_model_result",
    "softmax_link",
    "systematic_resample",
    "theta_from_alpha",
    "weights_from_latent",
]
