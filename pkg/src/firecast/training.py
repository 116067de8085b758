"""Mini-batch training of risk models on windowed samples."""

from __future__ import annotations

import dataclasses
import datetime as dt
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import AdamState, adam_step, bce_loss, sgd_step
from .grid import Indicator
from .ingest import SequenceSample
from .model.base import RiskModel

log = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    precision: int = 32
    loss_weighting: bool = False
    patience: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.precision not in (32, 64):
            raise ValueError(f"precision must be 32 or 64, got {self.precision}")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 when set")

    @property
    def dtype(self):
        return np.float32 if self.precision == 32 else np.float64

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int | None = None
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SampleArrays:
    """Samples stacked into dense arrays for a given channel selection."""

    windows: np.ndarray  # [N,T,C,H,W]
    static: np.ndarray | None  # [N,G,H,W]
    labels: np.ndarray  # [N,H,W]
    weights: np.ndarray | None  # [N,H,W], fourth-rooted fire power
    dates: list[dt.date]

    def __len__(self):
        return len(self.dates)


def stack_samples(
    samples: Sequence[SequenceSample],
    channels: Sequence[Indicator] | None = None,
    include_static: bool = False,
) -> SampleArrays:
    """Stack samples, selecting ``channels`` (in that order) from each window."""
    if not samples:
        raise ValueError("no samples to stack")
    have = samples[0].channels
    channels = tuple(Indicator(c) for c in channels) if channels is not None else have
    missing = [c.value for c in channels if c not in have]
    if missing:
        raise ValueError(f"samples lack channels {missing}; available: {[c.value for c in have]}")
    idx = [have.index(c) for c in channels]
    windows, static, labels, weights = [], [], [], []
    for s in samples:
        if s.channels != have:
            raise ValueError("all samples must carry the same channels")
        windows.append(s.window_array()[:, idx])
        labels.append(s.label.values)
        weights.append(s.weight.values if s.weight is not None else None)
        if include_static:
            if len(s.static_channels) == 0:
                raise ValueError(f"sample for {s.target_date} has no static channels")
            static.append(s.static_array())
    w = None
    if all(x is not None for x in weights):
        w = np.stack(weights).astype(np.float64)
    return SampleArrays(
        windows=np.stack(windows).astype(np.float64),
        static=np.stack(static).astype(np.float64) if include_static else None,
        labels=np.stack(labels).astype(np.float64),
        weights=w,
        dates=[s.target_date for s in samples],
    )


def arrays_for(model: RiskModel, samples) -> SampleArrays:
    if isinstance(samples, SampleArrays):
        return samples
    return stack_samples(samples, model.config.channels, include_static=bool(model.n_static))


def _check_shapes(model: RiskModel, data: SampleArrays):
    cfg = model.config
    expect = (cfg.T, len(cfg.channels), cfg.rows, cfg.cols)
    if data.windows.shape[1:] != expect:
        raise ValueError(f"sample windows {data.windows.shape[1:]} do not match model input {expect}")


def _pixel_weights(data: SampleArrays, idx, enabled: bool):
    if not enabled:
        return None
    if data.weights is None:
        raise ValueError("loss weighting needs fire-power weight frames on every sample")
    return 1.0 + data.weights[idx]


def mean_loss(model: RiskModel, data: SampleArrays, batch_size: int = 16, weighted: bool = False) -> float:
    """Mean BCE over ``data`` (no gradients recorded)."""
    total = 0.0
    for start in range(0, len(data), batch_size):
        idx = np.arange(start, min(start + batch_size, len(data)))
        st = data.static[idx] if data.static is not None else None
        pred = model.predict(data.windows[idx], st)
        w = _pixel_weights(data, idx, weighted)
        total += float(bce_loss(pred, data.labels[idx], w).item()) * len(idx)
    return total / len(data)


def train(
    model: RiskModel,
    samples,
    cfg: TrainConfig,
    validation=None,
) -> tuple[RiskModel, TrainHistory]:
    """Minimize pixel-mean BCE by mini-batch gradient descent.

    Returns the trained model (a converted copy when ``cfg.precision`` differs
    from the model's dtype) and the per-epoch loss history.  Normalization
    statistics are fitted on the training samples when the model has none.
    With ``patience`` and a ``validation`` set, training stops after that many
    epochs without validation improvement and the best parameters are restored.
    """
    if len(samples) == 0:
        raise ValueError("training set is empty")
    data = arrays_for(model, samples)
    _check_shapes(model, data)
    val = arrays_for(model, validation) if validation is not None and len(validation) else None
    if val is not None:
        _check_shapes(model, val)
    if cfg.patience is not None and val is None:
        raise ValueError("early stopping needs a validation set")

    if np.dtype(model.dtype) != np.dtype(cfg.dtype):
        model = model.astype(cfg.dtype)
    if model.normalization is None:
        model.fit_normalization(data.windows, data.static)

    params = model.params
    rng = np.random.default_rng(cfg.seed)
    state = AdamState() if cfg.optimizer == "adam" else None
    history = TrainHistory()
    best, best_snapshot, stale = np.inf, None, 0
    t0 = time.perf_counter()
    n = len(data)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = np.sort(order[start:start + cfg.batch_size])
            st = data.static[idx] if data.static is not None else None
            params.zero_grad()
            pred = model.forward(data.windows[idx], st)
            loss = bce_loss(pred, data.labels[idx], _pixel_weights(data, idx, cfg.loss_weighting))
            loss.backward()
            if cfg.optimizer == "adam":
                adam_step(params, cfg.lr, state)
            else:
                sgd_step(params, cfg.lr)
            total += float(loss.item()) * len(idx)
        history.loss.append(total / n)
        msg = f"epoch {epoch + 1}/{cfg.epochs} loss {history.loss[-1]:.5f}"
        if val is not None:
            vl = mean_loss(model, val, cfg.batch_size, cfg.loss_weighting)
            history.val_loss.append(vl)
            msg += f" val {vl:.5f}"
            if vl < best:
                best, stale, history.best_epoch = vl, 0, epoch
                if cfg.patience is not None:
                    best_snapshot = params.snapshot()
            else:
                stale += 1
        log.info(msg)
        if cfg.patience is not None and stale >= cfg.patience:
            log.info("early stop after epoch %d (best %d)", epoch + 1, history.best_epoch + 1)
            break
    if best_snapshot is not None:
        params.load_arrays(best_snapshot)
    history.seconds = time.perf_counter() - t0
    return model, history
