"""Saving and loading trained learned-optimizer models."""
from __future__ import annotations

import pathlib
from typing import Optional

from autodiff.params import AdamParamState, ModelFile, ModelParameters, load_model, save_model
from core.errors import ConfigurationError
from l2s.config import L2SConfig
from l2s.model import model_layout


def save_trained_model(
    path: pathlib.Path | str,
    params: ModelParameters,
    config: L2SConfig,
    counters: Optional[dict[str, int]] = None,
    meta_adam: Optional[AdamParamState] = None,
) -> pathlib.Path:
    values = {key: value for key, value in config.as_dict().items() if value is not None}
    return save_model(ModelFile(params, dict(counters or {}), meta_adam, values), path)


def load_trained_model(path: pathlib.Path | str) -> tuple[ModelParameters, L2SConfig, ModelFile]:
    """Weights and dimensions of a saved model; the layout is checked against the stored config."""
    model = load_model(path)
    if not model.config:
        raise ConfigurationError(f"{path} carries no model configuration.")
    config = L2SConfig.from_mapping({key: value for key, value in model.config.items()})
    model.params.check_layout(model_layout(config))
    return model.params, config, model


__all__ = ["load_trained_model", "save_trained_model"]
