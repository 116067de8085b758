from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..grid import GridSpec, Indicator, RasterFrame

ONE_DAY = dt.timedelta(days=1)


@dataclass(frozen=True, eq=False)
class SequenceSample:
    """A ``T``-day multi-channel input window and the label frame it predicts.

    ``window[t][c]`` is the frame of channel ``c`` on the ``t``-th day of the
    window, oldest first.
    """

    spec: GridSpec
    target_date: dt.date
    window: tuple[tuple[RasterFrame, ...], ...]
    label: RasterFrame
    static_channels: tuple[RasterFrame, ...] = ()
    weight: RasterFrame | None = None
    horizon: int = 1

    def __post_init__(self):
        window = tuple(tuple(day) for day in self.window)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "static_channels", tuple(self.static_channels))
        if not window or not window[0]:
            raise ValueError("window must hold at least one day and one channel")
        n_ch = len(window[0])
        frames = [f for day in window for f in day] + list(self.static_channels) + [self.label]
        if self.weight is not None:
            frames.append(self.weight)
        if any(f.spec != self.spec for f in frames):
            raise ValueError("all frames in a sample must share one GridSpec")
        if any(len(day) != n_ch for day in window):
            raise ValueError("every window day must carry the same channels")
        dates = [day[0].date for day in window]
        if any(f.date != d for day, d in zip(window, dates) for f in day):
            raise ValueError("frames within one window day must share a date")
        if any(b - a != ONE_DAY for a, b in zip(dates, dates[1:])):
            raise ValueError("window dates must be consecutive")
        if self.horizon < 1 or (self.target_date - dates[-1]).days < self.horizon:
            raise ValueError("window must end at least `horizon` days before the target date")
        if not np.all((self.label.values == 0) | (self.label.values == 1)):
            raise ValueError("label values must be 0 or 1")

    @property
    def T(self) -> int:
        return len(self.window)

    @property
    def channels(self) -> tuple[Indicator, ...]:
        return tuple(f.indicator for f in self.window[0])

    @property
    def window_dates(self) -> list[dt.date]:
        return [day[0].date for day in self.window]

    def window_array(self) -> np.ndarray:
        """Stacked window values, shape (T, C, rows, cols)."""
        return np.stack([np.stack([f.values for f in day]) for day in self.window])

    def static_array(self) -> np.ndarray:
        if not self.static_channels:
            return np.zeros((0,) + self.spec.shape, dtype=np.float32)
        return np.stack([f.values for f in self.static_channels])


@dataclass
class WindowReport:
    samples: list[SequenceSample]
    # target date -> missing (indicator, day) pairs
    gaps: dict[dt.date, list[tuple[Indicator, dt.date]]] = field(default_factory=dict)


def build_windows(
    frames: Mapping[Indicator, Mapping[dt.date, RasterFrame]],
    labels: Mapping[dt.date, RasterFrame],
    T: int = 7,
    horizon: int = 1,
    channels: Sequence[Indicator] | None = None,
    static_channels: Sequence[RasterFrame] = (),
    weights: Mapping[dt.date, RasterFrame] | None = None,
) -> WindowReport:
    """Assemble one sample per label date whose whole window is available.

    Target dates with any missing (channel, day) frame are skipped and listed
    in the report's ``gaps``; nothing is imputed.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    channels = tuple(Indicator(c) for c in (channels if channels is not None else frames.keys()))
    if not channels:
        raise ValueError("at least one channel is required")
    report = WindowReport(samples=[])
    for target in sorted(labels):
        last = target - horizon * ONE_DAY
        days = [last - (T - 1 - k) * ONE_DAY for k in range(T)]
        missing = [
            (ch, d) for d in days for ch in channels
            if d not in frames.get(ch, {})
        ]
        if missing:
            report.gaps[target] = missing
            continue
        window = [[frames[ch][d] for ch in channels] for d in days]
        weight = weights.get(target) if weights is not None else None
        report.samples.append(
            SequenceSample(
                spec=labels[target].spec,
                target_date=target,
                window=window,
                label=labels[target],
                static_channels=static_channels,
                weight=weight,
                horizon=horizon,
            )
        )
    return report


def chronological_split(samples: Sequence[SequenceSample], train_fraction: float = 0.8):
    """Split by target date: the earliest ``train_fraction`` for training, the rest held out."""
    ordered = sorted(samples, key=lambda s: s.target_date)
    n_train = int(round(train_fraction * len(ordered)))
    return ordered[:n_train], ordered[n_train:]
