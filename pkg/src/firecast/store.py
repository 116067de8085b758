"""On-disk layout of a gridded dataset directory.

::

    spec.json
    <indicator>/<YYYY-MM-DD>.wfg     one per dynamic indicator and day
    fire_label/<YYYY-MM-DD>.wfg      binary labels
    fire_weight/<YYYY-MM-DD>.wfg     fourth-rooted fire radiative power
    static/<indicator>.wfg           elevation, ndvi (optional)

Each ``.wfg`` has a ``.wfg.json`` metadata sidecar.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

from .grid import DYNAMIC_INDICATORS, GridSpec, RasterFrame, read_grid, write_grid
from .ingest import GridDataset

SPEC_NAME = "spec.json"
LABEL_DIR = "fire_label"
WEIGHT_DIR = "fire_weight"
STATIC_DIR = "static"
GRID_SUFFIX = ".wfg"


def grid_name(date: dt.date) -> str:
    return date.isoformat() + GRID_SUFFIX


def write_dataset(directory, ds: GridDataset) -> list[Path]:
    """Write every frame of ``ds``; returns the grid paths written, sorted."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / SPEC_NAME).write_text(json.dumps(ds.spec.to_dict(), indent=2) + "\n")
    written = []

    def put(sub, name, frame):
        path = directory / sub / name
        path.parent.mkdir(parents=True, exist_ok=True)
        write_grid(frame, path)
        written.append(path)

    for ind, by_day in ds.frames.items():
        for d, frame in by_day.items():
            put(ind.value, grid_name(d), frame)
    for d, frame in ds.labels.items():
        put(LABEL_DIR, grid_name(d), frame)
    for d, frame in ds.weights.items():
        put(WEIGHT_DIR, grid_name(d), frame)
    for frame in ds.static:
        put(STATIC_DIR, frame.indicator.value + GRID_SUFFIX, frame)
    return sorted(written)


def _read_dir(path: Path) -> dict[dt.date, RasterFrame]:
    if not path.is_dir():
        return {}
    out = {}
    for p in sorted(path.glob("*" + GRID_SUFFIX)):
        frame = read_grid(p)
        out[frame.date] = frame
    return out


def read_spec(directory) -> GridSpec:
    path = Path(directory) / SPEC_NAME
    try:
        return GridSpec.from_dict(json.loads(path.read_text()))
    except FileNotFoundError:
        raise FileNotFoundError(f"no {SPEC_NAME} in dataset directory {directory}") from None


def read_dataset(directory) -> GridDataset:
    directory = Path(directory)
    spec = read_spec(directory)
    frames = {}
    for ind in DYNAMIC_INDICATORS:
        by_day = _read_dir(directory / ind.value)
        if by_day:
            frames[ind] = by_day
    labels = _read_dir(directory / LABEL_DIR)
    weights = _read_dir(directory / WEIGHT_DIR)
    static_dir = directory / STATIC_DIR
    static = [read_grid(p) for p in sorted(static_dir.glob("*" + GRID_SUFFIX))] if static_dir.is_dir() else []
    frames_all = [f for by_day in frames.values() for f in by_day.values()] + list(labels.values()) + static
    if any(f.spec != spec for f in frames_all):
        raise ValueError(f"grids in {directory} do not all match {SPEC_NAME}")
    dates = sorted({d for by_day in frames.values() for d in by_day} | set(labels))
    return GridDataset(spec, dates, frames, labels, weights, static)
