"""Inverse-distance-weighted rasterization of point readings."""

from __future__ import annotations

import datetime as dt

import numpy as np

from ..grid import MILES_PER_DEGREE_LAT, GridSpec, Indicator, RasterFrame

STATION_EPS_MILES = 1e-9
_CHUNK_CELLS = 1 << 16


def idw_grid(spec: GridSpec, lats, lons, values, power: float = 2.0, eps: float = STATION_EPS_MILES):
    """IDW field on the cell centers of ``spec`` as a float64 array.

    Distances are flat-earth miles.  A cell center closer than ``eps`` to one
    or more stations takes their (mean) value exactly.  Points are sorted
    before weighting so the result does not depend on input order.
    """
    lats = np.asarray(lats, dtype=np.float64).ravel()
    lons = np.asarray(lons, dtype=np.float64).ravel()
    values = np.asarray(values, dtype=np.float64).ravel()
    if not (lats.size == lons.size == values.size):
        raise ValueError("lats, lons and values must have equal length")
    if values.size == 0:
        raise ValueError("cannot interpolate an empty point list")
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(lats)) and np.all(np.isfinite(lons))):
        raise ValueError("point coordinates and values must be finite")
    if power <= 0:
        raise ValueError(f"power must be > 0, got {power}")

    order = np.lexsort((values, lons, lats))
    lats, lons, values = lats[order], lons[order], values[order]

    clat, clon = spec.center_grid()
    clat, clon = clat.ravel(), clon.ravel()
    kx = spec.miles_per_degree_lon
    ky = MILES_PER_DEGREE_LAT
    out = np.empty(clat.size)
    lo, hi = values.min(), values.max()
    for start in range(0, clat.size, _CHUNK_CELLS):
        sl = slice(start, start + _CHUNK_CELLS)
        dy = (clat[sl, None] - lats[None, :]) * ky
        dx = (clon[sl, None] - lons[None, :]) * kx
        d = np.hypot(dx, dy)
        hit = d < eps
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(hit, 0.0, d ** -power)
            field = (w @ values) / w.sum(axis=1)
        at_station = hit.any(axis=1)
        if at_station.any():
            n_hit = hit[at_station].sum(axis=1)
            field[at_station] = (hit[at_station] @ values) / n_hit
        out[sl] = field
    # guard against rounding outside the input range
    return np.clip(out, lo, hi).reshape(spec.shape)


def interpolate(
    spec: GridSpec,
    points,
    indicator=Indicator.TEMPERATURE,
    date: dt.date | None = None,
    power: float = 2.0,
) -> RasterFrame:
    """Rasterize ``(lat, lon, value)`` points into a frame by IDW."""
    points = list(points)
    if not points:
        raise ValueError("cannot interpolate an empty point list")
    arr = np.asarray(points, dtype=np.float64)
    field = idw_grid(spec, arr[:, 0], arr[:, 1], arr[:, 2], power=power)
    return RasterFrame(spec, Indicator(indicator), date or dt.date(1970, 1, 1), field)
