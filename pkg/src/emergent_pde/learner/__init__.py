"""Learning and integrating a right-hand side on emergent charts."""

from .features import fd_features, spatial_derivatives, time_derivative
from .integrate import corridor_mask, integrate
from .training import (
    adam_train,
    gradient_check,
    reconstruct_held_out,
    surrogate_inputs,
    svd_projector,
    svd_regularize,
    train_rhs,
    train_source,
    train_surrogate,
)

__all__ = [
    "adam_train",
    "corridor_mask",
    "fd_features",
    "gradient_check",
    "integrate",
    "reconstruct_held_out",
    "spatial_derivatives",
    "surrogate_inputs",
    "svd_projector",
    "svd_regularize",
    "time_derivative",
    "train_rhs",
    "train_source",
    "train_surrogate",
]
