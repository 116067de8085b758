"""Seeded synthetic stand-in for the sensor and fire corpora.

A latent, spatially smooth and temporally persistent "heat" field drives
temperature up and dew point down.  A cell burns on day ``d`` when it has
been hot and dry (per the :class:`FireRule`) on each of the preceding
``run_days`` days, so the label is a function of the sequence, not of any
single day.  Air-quality channels carry a smoke plume from the same day's
fires, which makes them trailing indicators.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from ..grid import DYNAMIC_INDICATORS, MILES_PER_DEGREE_LAT, GridSpec, Indicator, RasterFrame, Transform
from .transforms import fourth_root

DEFAULT_START = dt.date(2018, 6, 1)
SYNTH_ORIGIN = (37.0, -120.0)


def synth_spec(rows: int = 32, cols: int = 32, cell_size_miles: float = 1.4) -> GridSpec:
    """A ``rows`` x ``cols`` grid anchored at a fixed point in central California."""
    lat_min, lon_min = SYNTH_ORIGIN
    lat_max = lat_min + rows * cell_size_miles / MILES_PER_DEGREE_LAT
    mid = math.radians(0.5 * (lat_min + lat_max))
    lon_max = lon_min + cols * cell_size_miles / (MILES_PER_DEGREE_LAT * math.cos(mid))
    return GridSpec(lat_min, lat_max, lon_min, lon_max, cell_size_miles, rows, cols)


@dataclass(frozen=True)
class FireRule:
    """Fire on day d iff temperature > its ``temp_quantile`` and dew point <
    its ``dew_quantile`` in the cell on each of days d-run_days .. d-1.

    Quantiles are taken over the whole generated dataset.
    """

    temp_quantile: float = 0.85
    dew_quantile: float = 0.15
    run_days: int = 3

    def __post_init__(self):
        if not (0.0 <= self.temp_quantile <= 1.0 and 0.0 <= self.dew_quantile <= 1.0):
            raise ValueError("quantiles must lie in [0, 1]")
        if self.run_days < 1:
            raise ValueError("run_days must be >= 1")

    def apply(self, temperature: np.ndarray, dew_point: np.ndarray) -> np.ndarray:
        """Labels of shape (days, rows, cols) from raw (days, rows, cols) fields."""
        t_hi = np.quantile(temperature, self.temp_quantile)
        d_lo = np.quantile(dew_point, self.dew_quantile)
        hot_dry = (temperature > t_hi) & (dew_point < d_lo)
        labels = np.zeros(temperature.shape, dtype=bool)
        n = self.run_days
        for d in range(n, temperature.shape[0]):
            labels[d] = hot_dry[d - n:d].all(axis=0)
        return labels


@dataclass
class GridDataset:
    spec: GridSpec
    dates: list[dt.date]
    frames: dict[Indicator, dict[dt.date, RasterFrame]]
    labels: dict[dt.date, RasterFrame]
    weights: dict[dt.date, RasterFrame]
    static: list[RasterFrame] = field(default_factory=list)

    def positive_fraction(self) -> float:
        return float(np.mean([f.values.mean() for f in self.labels.values()]))

    def transformed(self) -> "GridDataset":
        """Copy with ``log2(x + 1)`` applied to every dynamic channel."""
        from .transforms import transform_log2p1

        frames = {ind: {d: transform_log2p1(f) for d, f in by_day.items()} for ind, by_day in self.frames.items()}
        return GridDataset(self.spec, list(self.dates), frames, dict(self.labels), dict(self.weights), list(self.static))


def _smooth_noise(rng, shape, sigma):
    """Unit-variance Gaussian random fields, smoothed over the last two axes."""
    z = rng.standard_normal(shape)
    out = gaussian_filter(z, sigma=(0,) * (len(shape) - 2) + (sigma, sigma), mode="wrap")
    std = out.std(axis=(-2, -1), keepdims=True)
    return out / np.where(std > 0, std, 1.0)


def _ar1(innovations, rho):
    out = np.empty_like(innovations)
    out[0] = innovations[0]
    scale = np.sqrt(1.0 - rho * rho)
    for d in range(1, innovations.shape[0]):
        out[d] = rho * out[d - 1] + scale * innovations[d]
    return out


def synth_dataset(
    spec: GridSpec,
    days: int,
    seed: int,
    rule: FireRule | None = None,
    start: dt.date = DEFAULT_START,
    smoothness: float = 2.0,
    persistence: float = 0.98,
    noise: float = 1.0,
) -> GridDataset:
    """Generate ``days`` days of raw-unit indicator rasters and fire labels.

    Output is a pure function of ``(spec, days, seed, rule, start,
    smoothness, persistence, noise)``.  ``noise`` scales the
    weather that is independent of the latent heat field.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    rule = rule or FireRule()
    rng = np.random.default_rng(seed)
    shape = (days,) + spec.shape
    s = smoothness

    heat = _ar1(_smooth_noise(rng, shape, s), persistence)
    weather = [_ar1(_smooth_noise(rng, shape, s), persistence) for _ in range(3)]
    air = [_ar1(_smooth_noise(rng, shape, s), persistence) for _ in range(4)]
    geo = _smooth_noise(rng, (2,) + spec.shape, 2 * s)
    frp_noise = rng.uniform(0.5, 1.5, size=shape)

    temperature = np.maximum(24.0 + 7.0 * heat + noise * weather[0], 0.0)
    dew_point = np.maximum(10.0 - 5.0 * heat + noise * weather[1], 0.0)
    wind = np.maximum(8.0 + 3.0 * weather[2], 0.0)
    labels = rule.apply(temperature, dew_point)

    smoke = gaussian_filter(labels.astype(np.float64), sigma=(0, 1.5, 1.5), mode="wrap")
    pm25 = np.maximum(10.0 + 3.0 * air[0] + 60.0 * smoke, 0.0)
    pm10 = np.maximum(20.0 + 5.0 * air[1] + 90.0 * smoke, 0.0)
    co = np.maximum(0.5 + 0.15 * air[2] + 3.0 * smoke, 0.0)
    no2 = np.maximum(15.0 + 4.0 * air[3] + 20.0 * smoke, 0.0)
    frp = labels * 40.0 * frp_noise

    fields = {
        Indicator.TEMPERATURE: temperature,
        Indicator.DEW_POINT: dew_point,
        Indicator.WIND_SPEED: wind,
        Indicator.PM25: pm25,
        Indicator.PM10: pm10,
        Indicator.CO: co,
        Indicator.NO2: no2,
    }
    dates = [start + dt.timedelta(days=d) for d in range(days)]
    frames = {
        ind: {d: RasterFrame(spec, ind, d, fields[ind][k]) for k, d in enumerate(dates)}
        for ind in DYNAMIC_INDICATORS
    }
    label_frames = {d: RasterFrame(spec, Indicator.FIRE_LABEL, d, labels[k]) for k, d in enumerate(dates)}
    weight_frames = {
        d: RasterFrame(spec, Indicator.FIRE_LABEL, d, fourth_root(frp[k]), Transform.FOURTH_ROOT)
        for k, d in enumerate(dates)
    }
    static = [
        RasterFrame(spec, Indicator.ELEVATION, start, np.maximum(900.0 + 600.0 * geo[0], 0.0)),
        RasterFrame(spec, Indicator.NDVI, start, np.clip(0.5 + 0.15 * geo[1], 0.0, 1.0)),
    ]
    return GridDataset(spec, dates, frames, label_frames, weight_frames, static)
