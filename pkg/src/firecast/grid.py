"""Raster geometry, coordinate mapping and the grid file codec.

Cells use a flat equirectangular approximation: one mile of latitude is
1/69 degree and longitude is scaled by the cosine of the box's
mid-latitude.  Row 0 sits on the northern (``lat_max``) edge and column 0 on
the western (``lon_min``) edge.
"""

from __future__ import annotations

import datetime as _dt
import enum
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MILES_PER_DEGREE_LAT = 69.0
DEFAULT_MAX_CELLS = 2**24

GRID_MAGIC = b"WFGRID01"
_HEADER = struct.Struct("<8sII")

CALIFORNIA_BBOX = (32.5, 42.0, -124.5, -114.0)
CALIFORNIA_CELL_MILES = 1.4


class GridFormatError(ValueError):
    """Raised when a grid file or its sidecar cannot be decoded."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class Indicator(str, enum.Enum):
    TEMPERATURE = "temperature"
    DEW_POINT = "dew_point"
    WIND_SPEED = "wind_speed"
    PM25 = "pm25"
    PM10 = "pm10"
    CO = "co"
    NO2 = "no2"
    ELEVATION = "elevation"
    NDVI = "ndvi"
    FIRE_LABEL = "fire_label"
    # derived / output layers
    RELATIVE_HUMIDITY = "relative_humidity"
    FIRE_RISK = "fire_risk"

    @property
    def unit(self) -> str:
        return INDICATOR_UNITS[self]

    @property
    def is_measured(self) -> bool:
        return self in MEASURED_INDICATORS


INDICATOR_UNITS = {
    Indicator.TEMPERATURE: "°C",
    Indicator.DEW_POINT: "°C",
    Indicator.WIND_SPEED: "knots/hour",
    Indicator.PM25: "µg/m³",
    Indicator.PM10: "µg/m³",
    Indicator.CO: "ppm",
    Indicator.NO2: "ppb",
    Indicator.ELEVATION: "m",
    Indicator.NDVI: "dimensionless",
    Indicator.FIRE_LABEL: "dimensionless",
    Indicator.RELATIVE_HUMIDITY: "%",
    Indicator.FIRE_RISK: "dimensionless",
}

LEADING_INDICATORS = (Indicator.TEMPERATURE, Indicator.DEW_POINT, Indicator.WIND_SPEED)
TRAILING_INDICATORS = (Indicator.PM25, Indicator.PM10, Indicator.CO, Indicator.NO2)
DYNAMIC_INDICATORS = LEADING_INDICATORS + TRAILING_INDICATORS
STATIC_INDICATORS = (Indicator.ELEVATION, Indicator.NDVI)
MEASURED_INDICATORS = frozenset(DYNAMIC_INDICATORS + STATIC_INDICATORS)


class Transform(str, enum.Enum):
    NONE = "none"
    LOG2P1 = "log2p1"
    FOURTH_ROOT = "fourth_root"


@dataclass(frozen=True)
class GridSpec:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    cell_size_miles: float
    rows: int
    cols: int
    max_cells: int = field(default=DEFAULT_MAX_CELLS, compare=False, repr=False)

    def __post_init__(self):
        vals = (self.lat_min, self.lat_max, self.lon_min, self.lon_max, self.cell_size_miles)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"GridSpec fields must be finite, got {vals}")
        if not self.lat_min < self.lat_max:
            raise ValueError(f"lat_min {self.lat_min} must be < lat_max {self.lat_max}")
        if not self.lon_min < self.lon_max:
            raise ValueError(f"lon_min {self.lon_min} must be < lon_max {self.lon_max}")
        if self.cell_size_miles <= 0:
            raise ValueError(f"cell_size_miles must be > 0, got {self.cell_size_miles}")
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError("rows and cols must be integers")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"rows and cols must be >= 1, got {self.rows}x{self.cols}")
        if self.rows * self.cols > self.max_cells:
            raise ValueError(
                f"{self.rows}x{self.cols} = {self.rows * self.cols} cells exceeds cap {self.max_cells}"
            )

    @classmethod
    def from_bbox(cls, lat_min, lat_max, lon_min, lon_max, cell_size_miles, max_cells=DEFAULT_MAX_CELLS):
        """Derive rows/cols so that cells are at most ``cell_size_miles`` on a side."""
        if cell_size_miles <= 0:
            raise ValueError(f"cell_size_miles must be > 0, got {cell_size_miles}")
        mid = math.radians(0.5 * (lat_min + lat_max))
        height = (lat_max - lat_min) * MILES_PER_DEGREE_LAT
        width = (lon_max - lon_min) * MILES_PER_DEGREE_LAT * math.cos(mid)
        rows = max(1, math.ceil(height / cell_size_miles - 1e-9))
        cols = max(1, math.ceil(width / cell_size_miles - 1e-9))
        return cls(lat_min, lat_max, lon_min, lon_max, cell_size_miles, rows, cols, max_cells)

    @classmethod
    def california(cls, cell_size_miles=CALIFORNIA_CELL_MILES):
        return cls.from_bbox(*CALIFORNIA_BBOX, cell_size_miles)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def dlat(self) -> float:
        return (self.lat_max - self.lat_min) / self.rows

    @property
    def dlon(self) -> float:
        return (self.lon_max - self.lon_min) / self.cols

    @property
    def miles_per_degree_lon(self) -> float:
        return MILES_PER_DEGREE_LAT * math.cos(math.radians(0.5 * (self.lat_min + self.lat_max)))

    def contains(self, lat, lon) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def center_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center latitude and longitude arrays, each of shape (rows, cols)."""
        lats = self.lat_max - (np.arange(self.rows) + 0.5) * self.dlat
        lons = self.lon_min + (np.arange(self.cols) + 0.5) * self.dlon
        return np.meshgrid(lats, lons, indexing="ij")

    def to_dict(self) -> dict:
        return {
            "lat_min": self.lat_min,
            "lat_max": self.lat_max,
            "lon_min": self.lon_min,
            "lon_max": self.lon_max,
            "cell_size_miles": self.cell_size_miles,
            "rows": self.rows,
            "cols": self.cols,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        """Build from a dict; rows/cols are derived from the cell size when absent."""
        try:
            bbox = [float(d[k]) for k in ("lat_min", "lat_max", "lon_min", "lon_max")]
            cell = float(d["cell_size_miles"])
        except KeyError as exc:
            raise ValueError(f"grid spec missing field {exc.args[0]!r}") from None
        if "rows" in d and "cols" in d:
            return cls(*bbox, cell, int(d["rows"]), int(d["cols"]))
        return cls.from_bbox(*bbox, cell)


def cell_of(spec: GridSpec, lat: float, lon: float) -> tuple[int, int] | None:
    """Return the (row, col) holding a point, or ``None`` when it is out of bounds.

    The bounding box is closed; points on the southern or eastern edge map to
    the last row or column.
    """
    if not (math.isfinite(lat) and math.isfinite(lon)) or not spec.contains(lat, lon):
        return None
    row = min(int((spec.lat_max - lat) / spec.dlat), spec.rows - 1)
    col = min(int((lon - spec.lon_min) / spec.dlon), spec.cols - 1)
    return row, col


def cells_of(spec: GridSpec, lats, lons) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`cell_of`; returns ``(rows, cols, in_bounds)``."""
    lats = np.asarray(lats, dtype=np.float64)
    lons = np.asarray(lons, dtype=np.float64)
    ok = (
        np.isfinite(lats) & np.isfinite(lons)
        & (lats >= spec.lat_min) & (lats <= spec.lat_max)
        & (lons >= spec.lon_min) & (lons <= spec.lon_max)
    )
    with np.errstate(invalid="ignore"):
        r = np.floor((spec.lat_max - np.where(ok, lats, spec.lat_max)) / spec.dlat).astype(np.int64)
        c = np.floor((np.where(ok, lons, spec.lon_min) - spec.lon_min) / spec.dlon).astype(np.int64)
    return np.minimum(r, spec.rows - 1), np.minimum(c, spec.cols - 1), ok


def cell_center(spec: GridSpec, row: int, col: int) -> tuple[float, float]:
    if not (0 <= row < spec.rows and 0 <= col < spec.cols):
        raise IndexError(f"cell ({row}, {col}) outside {spec.rows}x{spec.cols} grid")
    lat = spec.lat_max - (row + 0.5) * spec.dlat
    lon = spec.lon_min + (col + 0.5) * spec.dlon
    return lat, lon


@dataclass(frozen=True, eq=False)
class RasterFrame:
    """One indicator's gridded values for one day."""

    spec: GridSpec
    indicator: Indicator
    date: _dt.date
    values: np.ndarray
    transform_applied: Transform = Transform.NONE

    def __post_init__(self):
        indicator = Indicator(self.indicator)
        transform = Transform(self.transform_applied)
        values = np.array(self.values, dtype=np.float32, order="C")
        if values.shape != self.spec.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
            raise ValueError(f"non-finite value in {indicator.value} frame at cell {bad}")
        values.setflags(write=False)
        object.__setattr__(self, "indicator", indicator)
        object.__setattr__(self, "transform_applied", transform)
        object.__setattr__(self, "values", values)

    def with_values(self, values, transform: Transform | None = None) -> "RasterFrame":
        return RasterFrame(
            self.spec, self.indicator, self.date, values,
            self.transform_applied if transform is None else transform,
        )

    def metadata(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "indicator": self.indicator.value,
            "date": self.date.isoformat(),
            "transform": self.transform_applied.value,
        }

    def __eq__(self, other):
        if not isinstance(other, RasterFrame):
            return NotImplemented
        return (
            self.metadata() == other.metadata()
            and self.values.tobytes() == other.values.tobytes()
        )

    __hash__ = None


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_grid(frame: RasterFrame, path) -> None:
    """Write ``frame`` as a WFGRID01 binary file plus a ``<path>.json`` sidecar."""
    path = Path(path)
    body = frame.values.astype("<f4", copy=False).tobytes(order="C")
    path.write_bytes(_HEADER.pack(GRID_MAGIC, frame.spec.rows, frame.spec.cols) + body)
    sidecar_path(path).write_text(json.dumps(frame.metadata(), indent=2, sort_keys=True) + "\n")


def read_grid(path) -> RasterFrame:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise GridFormatError("length", f"file has {len(raw)} bytes, header needs {_HEADER.size}")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != GRID_MAGIC:
        raise GridFormatError("magic", f"expected {GRID_MAGIC!r}, got {magic!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise GridFormatError("length", f"expected {expected} bytes for {rows}x{cols}, got {len(raw)}")

    try:
        meta = json.loads(sidecar_path(path).read_text())
    except FileNotFoundError:
        raise GridFormatError("sidecar", f"missing {sidecar_path(path).name}") from None
    except json.JSONDecodeError as exc:
        raise GridFormatError("sidecar", f"invalid JSON: {exc}") from None
    for key in ("spec", "indicator", "date", "transform"):
        if key not in meta:
            raise GridFormatError(key, "missing from sidecar")
    try:
        spec = GridSpec.from_dict(meta["spec"])
    except ValueError as exc:
        raise GridFormatError("spec", str(exc)) from None
    if (spec.rows, spec.cols) != (rows, cols):
        raise GridFormatError("rows/cols", f"header {rows}x{cols} disagrees with sidecar {spec.rows}x{spec.cols}")
    try:
        indicator = Indicator(meta["indicator"])
    except ValueError:
        raise GridFormatError("indicator", f"unknown indicator {meta['indicator']!r}") from None
    try:
        transform = Transform(meta["transform"])
    except ValueError:
        raise GridFormatError("transform", f"unknown transform {meta['transform']!r}") from None
    try:
        date = _dt.date.fromisoformat(meta["date"])
    except (TypeError, ValueError):
        raise GridFormatError("date", f"not an ISO date: {meta['date']!r}") from None

    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    return RasterFrame(spec, indicator, date, values, transform)
