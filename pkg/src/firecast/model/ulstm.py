"""U-Convolutional-LSTM risk-map network.

Per day, a strided conv encoder (weights shared across days) compresses the
input channels to a feature matrix that is flattened into a vector.  The
sequence of day vectors runs through a 2-layer LSTM; the final hidden state
is linearly projected back to the bottleneck shape and expanded by a
mirrored stack of transposed convolutions.  A 1x1 conv plus logistic
squashing yields per-cell fire probabilities.  There are no skip
connections between encoder and decoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    ParamStore,
    Tensor,
    conv2d,
    conv_output_size,
    deconv2d,
    deconv_output_size,
    linear,
    lstm_cell,
    relu,
    sigmoid,
)
from ..grid import Indicator
from .base import INIT_SCHEMES, ConfigError, RiskModel, relu_layer

LSTM_LAYERS = 2


@dataclass(frozen=True)
class UlstmConfig:
    channels: tuple[Indicator, ...]
    T: int = 7
    rows: int = 32
    cols: int = 32
    encoder_widths: tuple[int, ...] = (16, 32, 64)
    decoder_widths: tuple[int, ...] | None = None
    kernel: int = 3
    stride: int = 2
    lstm_layers: int = LSTM_LAYERS
    hidden: int = 256
    readout: str = "last"
    include_geo: bool = False
    horizon: int = 1
    seed: int = 0
    init: str = "he"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(Indicator(c) for c in self.channels))
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        if self.decoder_widths is None:
            object.__setattr__(self, "decoder_widths", tuple(reversed(self.encoder_widths)))
        else:
            object.__setattr__(self, "decoder_widths", tuple(int(w) for w in self.decoder_widths))
        self.validate()

    def validate(self):
        if not self.channels:
            raise ConfigError("channels must be non-empty")
        if len(set(self.channels)) != len(self.channels):
            raise ConfigError("channels must be distinct")
        if self.T < 1 or self.rows < 1 or self.cols < 1:
            raise ConfigError("T, rows and cols must be >= 1")
        if not self.encoder_widths or min(self.encoder_widths) < 1:
            raise ConfigError("encoder widths must be positive and non-empty")
        if self.decoder_widths != tuple(reversed(self.encoder_widths)):
            raise ConfigError(
                f"decoder widths {self.decoder_widths} must mirror encoder widths {self.encoder_widths}"
            )
        if self.lstm_layers != LSTM_LAYERS:
            raise ConfigError(f"the ULSTM uses exactly {LSTM_LAYERS} LSTM layers, got {self.lstm_layers}")
        if self.hidden < 1:
            raise ConfigError(f"hidden size must be >= 1, got {self.hidden}")
        if self.kernel < 1 or self.stride < 1:
            raise ConfigError("kernel and stride must be >= 1")
        if self.readout not in ("last", "mean"):
            raise ConfigError(f"readout must be 'last' or 'mean', got {self.readout!r}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"init must be one of {INIT_SCHEMES}, got {self.init!r}")
        sizes = self.spatial_sizes()
        if min(min(s) for s in sizes) < 1:
            raise ConfigError(f"grid {self.rows}x{self.cols} too small for {len(self.encoder_widths)} encoder blocks")
        for pair in self.decoder_output_padding():
            if any(not (p == 0 or 0 < p < self.stride) for p in pair):
                raise ConfigError(f"decoder cannot mirror encoder sizes {sizes} (output padding {pair})")

    @property
    def padding(self) -> int:
        return self.kernel // 2

    def spatial_sizes(self) -> list[tuple[int, int]]:
        """Spatial extent at the input and after each encoder block."""
        sizes = [(self.rows, self.cols)]
        for _ in self.encoder_widths:
            h, w = sizes[-1]
            sizes.append((
                conv_output_size(h, self.kernel, self.stride, self.padding),
                conv_output_size(w, self.kernel, self.stride, self.padding),
            ))
        return sizes

    def decoder_output_padding(self) -> list[tuple[int, int]]:
        sizes = self.spatial_sizes()
        pads = []
        for j in range(len(self.encoder_widths), 0, -1):
            (hi, wi), (ho, wo) = sizes[j], sizes[j - 1]
            base_h = deconv_output_size(hi, self.kernel, self.stride, self.padding)
            base_w = deconv_output_size(wi, self.kernel, self.stride, self.padding)
            pads.append((ho - base_h, wo - base_w))
        return pads


class UlstmModel(RiskModel):
    kind = "ulstm"

    def __init__(self, config: UlstmConfig, params: ParamStore | None = None):
        super().__init__(config, params if params is not None else _init_params(config))

    def forward(self, window, static=None) -> Tensor:
        """Risk map [N,H,W] (or [H,W] for a single unbatched window)."""
        cfg, P = self.config, self.params
        w, s, single = self._prepare(window, static)
        n, T, c, H, W = w.shape
        if s is not None:
            w = np.concatenate([w, np.broadcast_to(s[:, None], (n, T) + s.shape[1:])], axis=2)
        z = Tensor(np.ascontiguousarray(w.reshape(n * T, w.shape[2], H, W)))
        for k in range(len(cfg.encoder_widths)):
            z = relu(conv2d(z, P[f"enc{k}.w"], P[f"enc{k}.b"], cfg.stride, cfg.padding))
        hb, wb = cfg.spatial_sizes()[-1]
        feat = z.reshape(n, T, cfg.encoder_widths[-1] * hb * wb)

        zeros = np.zeros((n, cfg.hidden), dtype=self.dtype)
        h = [Tensor(zeros) for _ in range(LSTM_LAYERS)]
        c_state = [Tensor(zeros) for _ in range(LSTM_LAYERS)]
        tops = []
        for t in range(T):
            inp = feat[:, t, :]
            for layer in range(LSTM_LAYERS):
                h[layer], c_state[layer] = lstm_cell(
                    inp, h[layer], c_state[layer],
                    P[f"lstm{layer}.W"], P[f"lstm{layer}.U"], P[f"lstm{layer}.b"],
                )
                inp = h[layer]
            tops.append(inp)
        if cfg.readout == "mean":
            summary = tops[0]
            for t_out in tops[1:]:
                summary = summary + t_out
            summary = summary * (1.0 / T)
        else:
            summary = tops[-1]

        z = relu(linear(summary, P["proj.w"], P["proj.b"]))
        z = z.reshape(n, cfg.decoder_widths[0], hb, wb)
        for j, pad in enumerate(cfg.decoder_output_padding()):
            z = relu(deconv2d(z, P[f"dec{j}.w"], P[f"dec{j}.b"], cfg.stride, cfg.padding, pad))
        logits = conv2d(z, P["out.w"], P["out.b"])
        prob = sigmoid(logits).reshape(n, H, W)
        return prob.reshape(H, W) if single else prob


def _init_params(cfg: UlstmConfig) -> ParamStore:
    rng = np.random.default_rng(cfg.seed)
    P = ParamStore(np.float64)
    k = cfg.kernel
    c_in = len(cfg.channels) + (2 if cfg.include_geo else 0)
    for i, width in enumerate(cfg.encoder_widths):
        relu_layer(P, f"enc{i}", (width, c_in, k, k), c_in * k * k, rng, cfg.init)
        c_in = width
    hb, wb = cfg.spatial_sizes()[-1]
    d_in = cfg.encoder_widths[-1] * hb * wb
    for layer in range(LSTM_LAYERS):
        P.uniform(f"lstm{layer}.W", (4 * cfg.hidden, d_in), d_in, rng)
        P.uniform(f"lstm{layer}.U", (4 * cfg.hidden, cfg.hidden), cfg.hidden, rng)
        P.uniform(f"lstm{layer}.b", (4 * cfg.hidden,), cfg.hidden, rng)
        d_in = cfg.hidden
    relu_layer(P, "proj", (cfg.decoder_widths[0] * hb * wb, cfg.hidden), cfg.hidden, rng, cfg.init)
    dec = cfg.decoder_widths
    for j in range(len(dec)):
        c_in = dec[j]
        c_out = dec[j + 1] if j + 1 < len(dec) else dec[-1]
        fan_in = c_in * k * k
        if cfg.init == "he":
            # each output cell of a strided transposed conv sees about k*k/stride**2 taps per channel
            fan_in /= cfg.stride**2
        relu_layer(P, f"dec{j}", (c_in, c_out, k, k), fan_in, rng, cfg.init, bias_len=c_out)
    P.uniform("out.w", (1, dec[-1], 1, 1), dec[-1], rng)
    P.uniform("out.b", (1,), dec[-1], rng)
    return P


def build_ulstm(config: UlstmConfig) -> UlstmModel:
    return UlstmModel(config)
