from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..autodiff import ParamStore, Tensor, no_grad
from ..grid import Indicator

CONFIG_NAME = "config.json"
INIT_SCHEMES = ("he", "fan_in")


class ConfigError(ValueError):
    pass


def _to_jsonable(obj):
    if isinstance(obj, Indicator):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [_to_jsonable(v) for v in obj]
    return obj


def relu_layer(P: ParamStore, name, shape, fan_in, rng, scheme="he", bias_len=None):
    """Weights ``name.w`` and bias ``name.b`` of a layer feeding a ReLU.

    ``"he"`` draws U(+-sqrt(6/fan_in)) with zero bias, which keeps activation
    variance roughly constant through stacked ReLU layers; ``"fan_in"`` draws
    both from U(+-1/sqrt(fan_in)).
    """
    n_bias = shape[0] if bias_len is None else bias_len
    if scheme == "he":
        P.he_uniform(f"{name}.w", shape, fan_in, rng)
        P.zeros(f"{name}.b", (n_bias,))
    else:
        P.uniform(f"{name}.w", shape, fan_in, rng)
        P.uniform(f"{name}.b", (n_bias,), fan_in, rng)


class RiskModel:
    """Shared surface of the ULSTM and the CNN baseline.

    ``normalization`` is an optional ``(mean, std)`` pair of per-input-channel
    arrays (dynamic channels first, then static) applied before the network.
    """

    kind = "base"

    def __init__(self, config, params: ParamStore):
        self.config = config
        self.params = params
        self.normalization: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def dtype(self):
        return self.params.dtype

    @property
    def num_params(self) -> int:
        return self.params.num_params

    @property
    def n_static(self) -> int:
        return 2 if self.config.include_geo else 0

    # -- input handling -----------------------------------------------------
    def _prepare(self, window, static=None):
        w = np.asarray(window.data if isinstance(window, Tensor) else window)
        single = w.ndim == 4
        if single:
            w = w[None]
        cfg = self.config
        expect = (cfg.T, len(cfg.channels), cfg.rows, cfg.cols)
        if w.ndim != 5 or w.shape[1:] != expect:
            raise ValueError(f"window shape {w.shape} does not match config [N,T,C,H,W] = [N,{expect}]")
        n = w.shape[0]
        if self.n_static:
            if static is None:
                raise ValueError("model was configured with geological channels but none were given")
            s = np.asarray(static)
            if s.ndim == 3:
                s = np.broadcast_to(s[None], (n,) + s.shape)
            if s.shape != (n, self.n_static, cfg.rows, cfg.cols):
                raise ValueError(f"static shape {s.shape} != {(n, self.n_static, cfg.rows, cfg.cols)}")
        else:
            s = None
        w = w.astype(self.dtype)
        if s is not None:
            s = s.astype(self.dtype)
        if self.normalization is not None:
            mean, std = self.normalization
            c = w.shape[2]
            w = (w - mean[:c, None, None]) / std[:c, None, None]
            if s is not None:
                s = (s - mean[c:, None, None]) / std[c:, None, None]
        return w, s, single

    def fit_normalization(self, windows: np.ndarray, static: np.ndarray | None = None):
        """Per-channel mean/std over a stack of windows [N,T,C,H,W] (and static [N,G,H,W])."""
        w = np.asarray(windows, dtype=np.float64)
        mean = [w.mean(axis=(0, 1, 3, 4))]
        std = [w.std(axis=(0, 1, 3, 4))]
        if self.n_static:
            s = np.asarray(static, dtype=np.float64)
            mean.append(s.mean(axis=(0, 2, 3)))
            std.append(s.std(axis=(0, 2, 3)))
        mean, std = np.concatenate(mean), np.concatenate(std)
        std = np.where(std > 1e-12, std, 1.0)
        self.normalization = (mean.astype(self.dtype), std.astype(self.dtype))

    def forward(self, window, static=None) -> Tensor:
        raise NotImplementedError

    def predict(self, window, static=None) -> np.ndarray:
        """Risk map(s) as a plain array, without recording a graph."""
        with no_grad():
            out = self.forward(window, static)
        return np.asarray(out.data)

    # -- persistence ----------------------------------------------------------
    def config_dict(self) -> dict:
        d = {k: _to_jsonable(v) for k, v in dataclasses.asdict(self.config).items()}
        meta = {"kind": self.kind, "config": d, "dtype": self.dtype.name}
        if self.normalization is not None:
            meta["normalization"] = {
                "mean": [float(v) for v in self.normalization[0]],
                "std": [float(v) for v in self.normalization[1]],
            }
        return meta

    def save(self, directory) -> None:
        directory = Path(directory)
        self.params.save(directory)
        (directory / CONFIG_NAME).write_text(json.dumps(self.config_dict(), indent=2) + "\n")

    def astype(self, dtype):
        out = type(self)(self.config, self.params.astype(dtype))
        if self.normalization is not None:
            out.normalization = tuple(a.astype(dtype) for a in self.normalization)
        return out
