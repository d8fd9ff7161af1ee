"""Training, sampling, likelihood, guidance and the continuous baseline."""

from .congress import congress_sample, congress_train_step
from .guidance import Guidance, GuidanceError, Regressor, guided_sample, train_regressor
from .likelihood import ElboReport, elbo, exact_log_likelihood
from .sampling import (
    InconsistentStateError,
    ScaffoldMask,
    reverse_distributions,
    reverse_step,
    sample,
    scaffold_sample,
)
from .training import OptimConfig, fit, train_step

__all__ = [
    "ElboReport",
    "Guidance",
    "GuidanceError",
    "InconsistentStateError",
    "OptimConfig",
    "Regressor",
    "ScaffoldMask",
    "congress_sample",
    "congress_train_step",
    "elbo",
    "exact_log_likelihood",
    "fit",
    "guided_sample",
    "reverse_distributions",
    "reverse_step",
    "sample",
    "scaffold_sample",
    "train_regressor",
    "train_step",
]
