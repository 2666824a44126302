"""Noise schedules, samplers and convergence bounds for score-based generative models."""

from ._core import (
    ConfigError,
    Error,
    GaussianTarget,
    LogConcavityViolation,
    PreconditionError,
    PreprocessTransform,
    Schedule,
    ScoreNetParams,
    fit_gaussian,
    fit_transform,
    forward_exact,
    gaussian_kl,
    gaussian_w2,
    kl_bound,
    knn_kl,
    nll,
    sample,
    sliced_w2,
    sweep,
    train,
    w2_bound,
)

__all__ = [
    "ConfigError",
    "Error",
    "GaussianTarget",
    "LogConcavityViolation",
    "PreconditionError",
    "PreprocessTransform",
    "Schedule",
    "ScoreNetParams",
    "fit_gaussian",
    "fit_transform",
    "forward_exact",
    "gaussian_kl",
    "gaussian_w2",
    "kl_bound",
    "knn_kl",
    "nll",
    "sample",
    "sliced_w2",
    "sweep",
    "train",
    "w2_bound",
]
