"""Closed-form randomized and kernel machines with a reproducible benchmark protocol."""

__version__ = "0.1.0"

from .kernels import Gaussian, Linear, combined_gram, cross_gram, gram
from .models import (
    LabelCodec,
    ModelKind,
    R2kmModel,
    RkmModel,
    RvflModel,
    fit_model,
    fit_r2km,
    fit_rkm,
    fit_rvfl,
    load_model,
    save_model,
)
from .random_features import Activation, init_layer, transform

__all__ = [
    "Activation",
    "Gaussian",
    "LabelCodec",
    "Linear",
    "ModelKind",
    "R2kmModel",
    "RkmModel",
    "RvflModel",
    "combined_gram",
    "cross_gram",
    "fit_model",
    "fit_r2km",
    "fit_rkm",
    "fit_rvfl",
    "gram",
    "init_layer",
    "load_model",
    "save_model",
    "transform",
]
