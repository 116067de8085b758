"""ULSTM risk-map network, its indicator-subset variants and the CNN baseline."""

import json
from pathlib import Path

import numpy as np

from ..autodiff import ParamStore
from .base import CONFIG_NAME, ConfigError, RiskModel
from .cnn import CnnBaseline, CnnConfig, build_cnn_baseline
from .ulstm import UlstmConfig, UlstmModel, build_ulstm
from .variants import REFERENCE_ACCURACY, VARIANT_CHANNELS, variant_config

_KINDS = {"ulstm": (UlstmModel, UlstmConfig), "cnn": (CnnBaseline, CnnConfig)}


def load_model(directory) -> RiskModel:
    """Load a model saved with :meth:`RiskModel.save`."""
    directory = Path(directory)
    try:
        meta = json.loads((directory / CONFIG_NAME).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no {CONFIG_NAME} in {directory}") from None
    try:
        model_cls, cfg_cls = _KINDS[meta["kind"]]
    except KeyError:
        raise ConfigError(f"unknown model kind {meta.get('kind')!r}") from None
    raw = dict(meta["config"])
    for key, value in raw.items():
        if isinstance(value, list):
            raw[key] = tuple(value)
    model = model_cls(cfg_cls(**raw), ParamStore.load(directory))
    norm = meta.get("normalization")
    if norm is not None:
        model.normalization = (
            np.asarray(norm["mean"], dtype=model.dtype),
            np.asarray(norm["std"], dtype=model.dtype),
        )
    return model
