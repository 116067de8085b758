"""CSV importers for pre-downloaded sensor and fire-detection files."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..grid import Indicator

log = logging.getLogger(__name__)

SENSOR_HEADER = ("date", "site_id", "latitude", "longitude", "parameter", "value", "unit")
FIRE_HEADER = ("date", "latitude", "longitude", "frp")

# NO2 at 25 °C and 1 atm
NO2_UG_PER_M3_PER_PPB = 1.88

PARAMETER_ALIASES = {
    "temperature": Indicator.TEMPERATURE,
    "outdoor temperature": Indicator.TEMPERATURE,
    "temp": Indicator.TEMPERATURE,
    "dew_point": Indicator.DEW_POINT,
    "dew point": Indicator.DEW_POINT,
    "dew point temperature": Indicator.DEW_POINT,
    "wind_speed": Indicator.WIND_SPEED,
    "wind speed": Indicator.WIND_SPEED,
    "wind speed - resultant": Indicator.WIND_SPEED,
    "pm25": Indicator.PM25,
    "pm2.5": Indicator.PM25,
    "pm2.5 - local conditions": Indicator.PM25,
    "pm10": Indicator.PM10,
    "pm10 total 0-10um stp": Indicator.PM10,
    "co": Indicator.CO,
    "carbon monoxide": Indicator.CO,
    "no2": Indicator.NO2,
    "nitrogen dioxide (no2)": Indicator.NO2,
    "nitrogen dioxide": Indicator.NO2,
    "elevation": Indicator.ELEVATION,
    "ndvi": Indicator.NDVI,
}

# unit spelling -> (canonical indicator unit, converter)
_UNIT_CONVERSIONS = {
    (Indicator.TEMPERATURE, "degrees fahrenheit"): lambda v: (v - 32.0) / 1.8,
    (Indicator.TEMPERATURE, "°f"): lambda v: (v - 32.0) / 1.8,
    (Indicator.TEMPERATURE, "f"): lambda v: (v - 32.0) / 1.8,
    (Indicator.DEW_POINT, "degrees fahrenheit"): lambda v: (v - 32.0) / 1.8,
    (Indicator.DEW_POINT, "°f"): lambda v: (v - 32.0) / 1.8,
    (Indicator.DEW_POINT, "f"): lambda v: (v - 32.0) / 1.8,
    (Indicator.WIND_SPEED, "knots"): lambda v: v,
    (Indicator.CO, "parts per million"): lambda v: v,
    (Indicator.NO2, "parts per billion"): lambda v: v,
}

_CANONICAL_SPELLINGS = {
    Indicator.TEMPERATURE: {"°c", "c", "degrees centigrade", "degrees celsius", "deg c"},
    Indicator.DEW_POINT: {"°c", "c", "degrees centigrade", "degrees celsius", "deg c"},
    Indicator.WIND_SPEED: {"knots/hour"},
    Indicator.PM25: {"µg/m³", "ug/m3", "micrograms/cubic meter (lc)", "micrograms/cubic meter"},
    Indicator.PM10: {"µg/m³", "ug/m3", "micrograms/cubic meter (25 c)", "micrograms/cubic meter"},
    Indicator.CO: {"ppm"},
    Indicator.NO2: {"ppb"},
    Indicator.ELEVATION: {"m", "meters"},
    Indicator.NDVI: {"dimensionless", "", "none"},
}


class CsvParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SensorReading:
    site_id: str
    lat: float
    lon: float
    date: dt.date
    indicator: Indicator
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"reading value must be finite, got {self.value}")
        if not Indicator(self.indicator).is_measured:
            raise ValueError(f"{self.indicator} is not a measured indicator")


@dataclass(frozen=True)
class FireRecord:
    lat: float
    lon: float
    date: dt.date
    frp: float

    def __post_init__(self):
        if not (self.frp >= 0 and math.isfinite(self.frp)):
            raise ValueError(f"frp must be finite and >= 0, got {self.frp}")


@dataclass
class ParseResult:
    records: list
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def to_canonical(indicator: Indicator, value: float, unit: str) -> float:
    """Convert ``value`` given in ``unit`` to the indicator's canonical unit."""
    key = unit.strip().lower()
    if key in _CANONICAL_SPELLINGS.get(indicator, ()) or key == indicator.unit.lower():
        return value
    try:
        return _UNIT_CONVERSIONS[(indicator, key)](value)
    except KeyError:
        raise ValueError(f"unsupported unit {unit!r} for {indicator.value}") from None


def no2_ppb_to_ugm3(ppb):
    return ppb * NO2_UG_PER_M3_PER_PPB


def _open_text(source):
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, io.TextIOBase):
        return source
    raise TypeError(f"cannot read CSV from {type(source).__name__}")


def _check_header(reader, expected, line=1) -> bool:
    """False for a zero-byte file, which counts as empty; raises on a wrong header."""
    try:
        header = next(reader)
    except StopIteration:
        return False
    header = tuple(h.strip().lower() for h in header)
    if header != expected:
        raise CsvParseError(line, f"expected header {','.join(expected)}, got {','.join(header)}")
    return True


def _parse_date(text, line):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise CsvParseError(line, f"unparseable date {text!r}") from None


def parse_readings(source) -> ParseResult:
    """Read sensor rows ``date,site_id,latitude,longitude,parameter,value,unit``.

    Rows with unknown parameters, unsupported units or non-finite values are
    skipped and listed in ``rejected`` as ``(line, reason)``.  A wrong header
    or an unparseable date aborts with :class:`CsvParseError`.
    """
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        result = ParseResult(records=[])
        if not _check_header(reader, SENSOR_HEADER):
            return result
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(SENSOR_HEADER):
                result.rejected.append((lineno, f"expected {len(SENSOR_HEADER)} fields, got {len(row)}"))
                continue
            date_s, site, lat_s, lon_s, param, value_s, unit = row
            date = _parse_date(date_s, lineno)
            indicator = PARAMETER_ALIASES.get(param.strip().lower())
            if indicator is None:
                result.rejected.append((lineno, f"unknown parameter {param!r}"))
                continue
            try:
                lat, lon, value = float(lat_s), float(lon_s), float(value_s)
            except ValueError:
                result.rejected.append((lineno, "non-numeric coordinate or value"))
                continue
            if not all(math.isfinite(v) for v in (lat, lon, value)):
                result.rejected.append((lineno, "non-finite coordinate or value"))
                continue
            try:
                value = to_canonical(indicator, value, unit)
            except ValueError as exc:
                result.rejected.append((lineno, str(exc)))
                continue
            result.records.append(SensorReading(site.strip(), lat, lon, date, indicator, value))
        result.accepted = len(result.records)
    finally:
        if fh is not source:
            fh.close()
    if result.rejected:
        log.warning("rejected %d sensor rows", len(result.rejected))
    return result


def parse_fires(source) -> ParseResult:
    """Read fire detections ``date,latitude,longitude,frp``."""
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        result = ParseResult(records=[])
        if not _check_header(reader, FIRE_HEADER):
            return result
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(FIRE_HEADER):
                result.rejected.append((lineno, f"expected {len(FIRE_HEADER)} fields, got {len(row)}"))
                continue
            date = _parse_date(row[0], lineno)
            try:
                lat, lon, frp = (float(x) for x in row[1:])
            except ValueError:
                result.rejected.append((lineno, "non-numeric field"))
                continue
            if not all(math.isfinite(v) for v in (lat, lon, frp)) or frp < 0:
                result.rejected.append((lineno, "non-finite coordinate or negative frp"))
                continue
            result.records.append(FireRecord(lat, lon, date, frp))
        result.accepted = len(result.records)
    finally:
        if fh is not source:
            fh.close()
    return result


def daily_aggregate(readings: Iterable[SensorReading], indicator, date) -> list[tuple[str, float, float, float]]:
    """Per-site arithmetic mean of one indicator on one day, sorted by site id.

    A site's coordinates are taken from its first reading of the day.
    """
    indicator = Indicator(indicator)
    sums = defaultdict(float)
    counts = defaultdict(int)
    where = {}
    for r in readings:
        if r.indicator is not indicator or r.date != date:
            continue
        sums[r.site_id] += r.value
        counts[r.site_id] += 1
        where.setdefault(r.site_id, (r.lat, r.lon))
    return [
        (site, where[site][0], where[site][1], sums[site] / counts[site])
        for site in sorted(sums)
    ]
