"""Regenerate the small CSV bundle shipped under src/firecast/data/sample.

Stations are scattered over a 16 x 16 synthetic grid and read the synthetic
fields at their cell; one station reports temperature in Fahrenheit to
exercise unit conversion.  Fires become one detection per burning cell.

    python demos/build_sample_bundle.py
"""

import csv
import json
from pathlib import Path

import numpy as np

from firecast.grid import DYNAMIC_INDICATORS, Indicator, cell_of
from firecast.ingest import synth_dataset, synth_spec

OUT = Path(__file__).resolve().parents[1] / "src" / "firecast" / "data" / "sample"
DAYS, SEED, N_STATIONS = 16, 11, 28

UNITS = {ind: ind.unit for ind in DYNAMIC_INDICATORS}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    spec = synth_spec(16, 16, 2.0)
    ds = synth_dataset(spec, DAYS, SEED)
    rng = np.random.default_rng(SEED)
    lats = rng.uniform(spec.lat_min, spec.lat_max, N_STATIONS)
    lons = rng.uniform(spec.lon_min, spec.lon_max, N_STATIONS)

    with open(OUT / "sensors.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "site_id", "latitude", "longitude", "parameter", "value", "unit"])
        for k in range(N_STATIONS):
            site = f"S{k:03d}"
            r, c = cell_of(spec, lats[k], lons[k])
            for frame in ds.static:
                w.writerow([ds.dates[0].isoformat(), site, f"{lats[k]:.5f}", f"{lons[k]:.5f}",
                            frame.indicator.value, f"{frame.values[r, c]:.4f}", frame.indicator.unit])
            for d in ds.dates:
                for ind in DYNAMIC_INDICATORS:
                    v = float(ds.frames[ind][d].values[r, c])
                    unit = UNITS[ind]
                    if ind is Indicator.TEMPERATURE and k == 0:
                        v, unit = v * 1.8 + 32.0, "degrees fahrenheit"
                    w.writerow([d.isoformat(), site, f"{lats[k]:.5f}", f"{lons[k]:.5f}", ind.value, f"{v:.4f}", unit])

    clats, clons = spec.center_grid()
    with open(OUT / "fires.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "latitude", "longitude", "frp"])
        for d in ds.dates:
            frp = ds.weights[d].values.astype(np.float64) ** 4
            for r, c in zip(*np.nonzero(ds.labels[d].values)):
                w.writerow([d.isoformat(), f"{clats[r, c]:.5f}", f"{clons[r, c]:.5f}", f"{frp[r, c]:.3f}"])

    (OUT / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    mid_lat, mid_lon = 0.5 * (spec.lat_min + spec.lat_max), 0.5 * (spec.lon_min + spec.lon_max)
    profiles = [
        {"id": "p-general", "lat": mid_lat, "lon": mid_lon, "categories": ["general"], "contact": "general@example.org"},
        {"id": "p-asthma", "lat": mid_lat, "lon": mid_lon, "categories": ["respiratory"], "contact": "asthma@example.org"},
        {"id": "p-mobility", "lat": spec.lat_min + 0.05, "lon": spec.lon_min + 0.05,
         "categories": ["mobility_impaired", "sensory_impaired"], "contact": "mobility@example.org"},
        {"id": "p-away", "lat": spec.lat_max + 1.0, "lon": mid_lon, "categories": ["general"], "contact": ""},
    ]
    (OUT / "profiles.json").write_text(json.dumps(profiles, indent=2) + "\n")
    print(f"wrote sample bundle to {OUT} (fire fraction {ds.positive_fraction():.3f})")


if __name__ == "__main__":
    main()
