"""CSV files to a gridded, transformed dataset."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..grid import DYNAMIC_INDICATORS, STATIC_INDICATORS, GridSpec, Indicator
from .fires import rasterize_fires
from .interp import interpolate
from .readers import daily_aggregate, parse_fires, parse_readings
from .synth import GridDataset
from .transforms import transform_log2p1

log = logging.getLogger(__name__)


@dataclass
class IngestReport:
    dataset: GridDataset
    # date -> dynamic indicators with no readings that day
    gaps: dict[dt.date, list[Indicator]] = field(default_factory=dict)
    rejected: dict[str, list[tuple[int, str]]] = field(default_factory=dict)
    clipped_cells: int = 0

    def gap_dict(self) -> dict:
        return {d.isoformat(): [i.value for i in inds] for d, inds in sorted(self.gaps.items())}


def ingest_files(
    spec: GridSpec,
    sensor_paths: Sequence,
    fire_path=None,
    start: dt.date | None = None,
    end: dt.date | None = None,
    power: float = 2.0,
) -> IngestReport:
    """Parse, grid and transform sensor and fire CSVs.

    Dynamic indicators are interpolated per day and ``log2(x + 1)``
    transformed; interpolated negatives (e.g. sub-zero temperatures) are
    clipped to 0 first.  Fire labels and weights are written for every day
    that has at least one indicator grid.  Static indicators are interpolated
    once from all their readings.
    """
    readings, rejected = [], {}
    for path in sensor_paths:
        res = parse_readings(path)
        readings += res.records
        if res.rejected:
            rejected[str(path)] = res.rejected
    fires = []
    if fire_path is not None:
        res = parse_fires(fire_path)
        fires = res.records
        if res.rejected:
            rejected[str(fire_path)] = res.rejected

    dates = sorted({r.date for r in readings} | {f.date for f in fires})
    lo = start or (dates[0] if dates else None)
    hi = end or (dates[-1] if dates else None)
    days = [] if lo is None or hi is None else [lo + dt.timedelta(days=k) for k in range((hi - lo).days + 1)]

    frames: dict[Indicator, dict] = {}
    gaps: dict[dt.date, list[Indicator]] = {}
    clipped = 0
    by_day: dict[dt.date, list] = {}
    for r in readings:
        by_day.setdefault(r.date, []).append(r)
    for d in days:
        todays = by_day.get(d, [])
        for ind in DYNAMIC_INDICATORS:
            pts = [(lat, lon, v) for _, lat, lon, v in daily_aggregate(todays, ind, d)]
            if not pts:
                gaps.setdefault(d, []).append(ind)
                continue
            frame = interpolate(spec, pts, ind, d, power)
            neg = frame.values < 0
            if neg.any():
                clipped += int(neg.sum())
                frame = frame.with_values(np.where(neg, 0.0, frame.values))
            frames.setdefault(ind, {})[d] = transform_log2p1(frame)

    covered = sorted({d for f in frames.values() for d in f})
    labels, weights = {}, {}
    for d in covered:
        labels[d], weights[d] = rasterize_fires(spec, fires, d)

    static = []
    for ind in STATIC_INDICATORS:
        pts = {}
        for r in readings:
            if r.indicator is ind:
                pts.setdefault(r.site_id, (r.lat, r.lon, r.value))
        if pts:
            first = min((r.date for r in readings if r.indicator is ind))
            static.append(interpolate(spec, [pts[k] for k in sorted(pts)], ind, first, power))
    if clipped:
        log.info("clipped %d negative interpolated cells to 0 before log2p1", clipped)
    ds = GridDataset(spec, covered, frames, labels, weights, static)
    return IngestReport(ds, gaps, rejected, clipped)
