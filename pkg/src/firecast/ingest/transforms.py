"""Pointwise value transforms applied to raster frames."""

from __future__ import annotations

import numpy as np

from ..grid import Indicator, RasterFrame, Transform


def _require_nonnegative(frame: RasterFrame, what: str):
    neg = frame.values < 0
    if neg.any():
        r, c = (int(i) for i in np.argwhere(neg)[0])
        raise ValueError(
            f"{what} needs values >= 0; {frame.indicator.value} cell ({r}, {c}) is {frame.values[r, c]}"
        )
    if frame.transform_applied is not Transform.NONE:
        raise ValueError(f"frame already carries transform {frame.transform_applied.value}")


def log2p1(x):
    return np.log2(np.asarray(x, dtype=np.float64) + 1.0)


def inverse_log2p1(y):
    return np.exp2(np.asarray(y, dtype=np.float64)) - 1.0


def fourth_root(x):
    return np.sqrt(np.sqrt(np.asarray(x, dtype=np.float64)))


def transform_log2p1(frame: RasterFrame) -> RasterFrame:
    """Compress extreme readings with ``y = log2(x + 1)``."""
    _require_nonnegative(frame, "log2p1")
    return frame.with_values(log2p1(frame.values), Transform.LOG2P1)


def transform_fourth_root(frame: RasterFrame) -> RasterFrame:
    _require_nonnegative(frame, "fourth_root")
    return frame.with_values(fourth_root(frame.values), Transform.FOURTH_ROOT)


def raw_values(frame: RasterFrame) -> np.ndarray:
    """Undo whatever transform produced ``frame`` (float64 copy)."""
    v = frame.values.astype(np.float64)
    if frame.transform_applied is Transform.LOG2P1:
        return inverse_log2p1(v)
    if frame.transform_applied is Transform.FOURTH_ROOT:
        return v**4
    return v


def relative_humidity(temperature: RasterFrame, dew_point: RasterFrame) -> RasterFrame:
    """Relative humidity (%) from temperature and dew point via the Magnus formula."""
    if temperature.spec != dew_point.spec or temperature.date != dew_point.date:
        raise ValueError("temperature and dew point frames must share grid and date")
    t = raw_values(temperature)
    td = raw_values(dew_point)
    a, b = 17.625, 243.04
    rh = 100.0 * np.exp(a * td / (b + td) - a * t / (b + t))
    return RasterFrame(temperature.spec, Indicator.RELATIVE_HUMIDITY, temperature.date, np.clip(rh, 0.0, 100.0))
