"""Reverse-mode differentiation over 2-D arrays."""
from autodiff.params import AdamParamState, ModelFile, ModelParameters, ParamSpec, adam_step_params, load_model, save_model
from autodiff.tensor import Tape, Tensor2, precision

__all__ = [
    "AdamParamState",
    "ModelFile",
    "ModelParameters",
    "ParamSpec",
    "Tape",
    "Tensor2",
    "adam_step_params",
    "load_model",
    "precision",
    "save_model",
]
