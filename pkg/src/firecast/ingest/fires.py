from __future__ import annotations

import datetime as dt
from typing import Iterable

import numpy as np

from ..grid import GridSpec, Indicator, RasterFrame, Transform, cells_of
from .readers import FireRecord
from .transforms import fourth_root


def rasterize_fires(spec: GridSpec, records: Iterable[FireRecord], date: dt.date):
    """Binary fire label and fourth-root FRP weight frames for one day.

    FRP of all detections in a cell is summed before the root is taken.
    Detections outside the grid are ignored.
    """
    todays = [r for r in records if r.date == date]
    frp = np.zeros(spec.shape, dtype=np.float64)
    hit = np.zeros(spec.shape, dtype=bool)
    if todays:
        rows, cols, ok = cells_of(spec, [r.lat for r in todays], [r.lon for r in todays])
        power = np.array([r.frp for r in todays])
        np.add.at(frp, (rows[ok], cols[ok]), power[ok])
        hit[rows[ok], cols[ok]] = True
    label = RasterFrame(spec, Indicator.FIRE_LABEL, date, hit.astype(np.float32))
    weight = RasterFrame(spec, Indicator.FIRE_LABEL, date, fourth_root(frp), Transform.FOURTH_ROOT)
    return label, weight
