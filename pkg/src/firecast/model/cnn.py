"""LeNet-5 style baseline with no temporal mechanism.

The T x C window is flattened into a (T*C)-channel image: the days become
ordinary input channels.  Three conv blocks (the first two followed by 2x2
average pooling) feed two fully connected layers, the second of which
projects straight onto the H x W risk map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import ParamStore, Tensor, avg_pool2d, conv2d, conv_output_size, linear, relu, sigmoid
from ..grid import Indicator
from .base import INIT_SCHEMES, ConfigError, RiskModel, relu_layer


@dataclass(frozen=True)
class CnnConfig:
    channels: tuple[Indicator, ...]
    T: int = 7
    rows: int = 32
    cols: int = 32
    widths: tuple[int, int, int] = (6, 16, 120)
    kernel: int = 5
    fc_hidden: int = 84
    include_geo: bool = False
    horizon: int = 1
    seed: int = 0
    init: str = "he"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(Indicator(c) for c in self.channels))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.channels:
            raise ConfigError("channels must be non-empty")
        if len(self.widths) != 3 or min(self.widths) < 1:
            raise ConfigError("the baseline has exactly three positive conv widths")
        if self.fc_hidden < 1 or self.T < 1:
            raise ConfigError("fc_hidden and T must be >= 1")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"init must be one of {INIT_SCHEMES}, got {self.init!r}")
        h, w = self.feature_size()
        if h < 1 or w < 1:
            raise ConfigError(f"grid {self.rows}x{self.cols} too small for the baseline")

    @property
    def in_channels(self) -> int:
        return self.T * len(self.channels) + (2 if self.include_geo else 0)

    def conv3_kernel(self) -> tuple[int, int]:
        h, w = self.rows // 4, self.cols // 4
        return min(self.kernel, h), min(self.kernel, w)

    def feature_size(self) -> tuple[int, int]:
        kh, kw = self.conv3_kernel()
        h, w = self.rows // 4, self.cols // 4
        if h < 1 or w < 1:
            return (0, 0)
        return conv_output_size(h, kh, 1, 0), conv_output_size(w, kw, 1, 0)


class CnnBaseline(RiskModel):
    kind = "cnn"

    def __init__(self, config: CnnConfig, params: ParamStore | None = None):
        super().__init__(config, params if params is not None else _init_params(config))

    def forward(self, window, static=None) -> Tensor:
        cfg, P = self.config, self.params
        w, s, single = self._prepare(window, static)
        n, T, c, H, W = w.shape
        x = w.reshape(n, T * c, H, W)
        if s is not None:
            x = np.concatenate([x, s], axis=1)
        pad = cfg.kernel // 2
        z = Tensor(np.ascontiguousarray(x))
        z = avg_pool2d(relu(conv2d(z, P["conv0.w"], P["conv0.b"], 1, pad)), 2)
        z = avg_pool2d(relu(conv2d(z, P["conv1.w"], P["conv1.b"], 1, pad)), 2)
        z = relu(conv2d(z, P["conv2.w"], P["conv2.b"]))
        z = z.reshape(n, int(np.prod(z.shape[1:])))
        z = relu(linear(z, P["fc0.w"], P["fc0.b"]))
        logits = linear(z, P["fc1.w"], P["fc1.b"])
        prob = sigmoid(logits).reshape(n, H, W)
        return prob.reshape(H, W) if single else prob


def _init_params(cfg: CnnConfig) -> ParamStore:
    rng = np.random.default_rng(cfg.seed)
    P = ParamStore(np.float64)
    k = cfg.kernel
    w0, w1, w2 = cfg.widths
    kh, kw = cfg.conv3_kernel()
    shapes = [
        ("conv0", (w0, cfg.in_channels, k, k)),
        ("conv1", (w1, w0, k, k)),
        ("conv2", (w2, w1, kh, kw)),
    ]
    for name, shape in shapes:
        relu_layer(P, name, shape, int(np.prod(shape[1:])), rng, cfg.init)
    fh, fw = cfg.feature_size()
    d = w2 * fh * fw
    relu_layer(P, "fc0", (cfg.fc_hidden, d), d, rng, cfg.init)
    P.uniform("fc1.w", (cfg.rows * cfg.cols, cfg.fc_hidden), cfg.fc_hidden, rng)
    P.uniform("fc1.b", (cfg.rows * cfg.cols,), cfg.fc_hidden, rng)
    return P


def build_cnn_baseline(config: CnnConfig) -> CnnBaseline:
    return CnnBaseline(config)
