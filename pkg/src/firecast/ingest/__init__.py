"""Sensor/fire ingestion, rasterization, transforms and training windows."""

from .fires import rasterize_fires
from .interp import idw_grid, interpolate
from .pipeline import IngestReport, ingest_files
from .readers import (
    CsvParseError,
    FireRecord,
    ParseResult,
    SensorReading,
    daily_aggregate,
    no2_ppb_to_ugm3,
    parse_fires,
    parse_readings,
)
from .synth import FireRule, GridDataset, synth_dataset, synth_spec
from .transforms import (
    raw_values,
    relative_humidity,
    transform_fourth_root,
    transform_log2p1,
)
from .windows import SequenceSample, WindowReport, build_windows, chronological_split
