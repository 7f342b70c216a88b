"""Blind generative equalization with diffusion posterior sampling and a parametric filter."""

__version__ = "0.1.0"

from .blockar import BlockArConfig, restore_recording
from .denoiser import DenoiserPrior, GaussianPsdPrior, IdentityPrior, PreconditionedDenoiser, Preconditioning
from .dsp import Signal, StftConfig, analysis_config, istft, stft
from .errors import (
    AudioIOError,
    ConfigError,
    DomainError,
    GeneqError,
    InputSizeError,
    NumericError,
    ShapeError,
    ValidationError,
)
from .filters import BcrConfig, FilterParams, bcr_cost, eval_response_db, init_default, project
from .ltas import LtasProfile, apply_inverse_eq, compute_ltas, ltas_distance, ltas_eq_filter
from .optim import AdamState, adam_step
from .sampler import (
    GuidanceConfig,
    InnerLoopConfig,
    NoiseSchedule,
    SamplerTrace,
    build_schedule,
    filter_inner_loop,
    guidance_scale,
    likelihood_gradient,
    restore_segment,
)

__all__ = [
    "BlockArConfig",
    "restore_recording",
    "DenoiserPrior",
    "GaussianPsdPrior",
    "IdentityPrior",
    "PreconditionedDenoiser",
    "Preconditioning",
    "Signal",
    "StftConfig",
    "analysis_config",
    "istft",
    "stft",
    "AudioIOError",
    "ConfigError",
    "DomainError",
    "GeneqError",
    "InputSizeError",
    "NumericError",
    "ShapeError",
    "ValidationError",
    "BcrConfig",
    "FilterParams",
    "bcr_cost",
    "eval_response_db",
    "init_default",
    "project",
    "LtasProfile",
    "apply_inverse_eq",
    "compute_ltas",
    "ltas_distance",
    "ltas_eq_filter",
    "AdamState",
    "adam_step",
    "GuidanceConfig",
    "InnerLoopConfig",
    "NoiseSchedule",
    "SamplerTrace",
    "build_schedule",
    "filter_inner_loop",
    "guidance_scale",
    "likelihood_gradient",
    "restore_segment",
]
