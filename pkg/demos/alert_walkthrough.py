"""How one risk map turns into personalized alerts.

Builds a risk map with a single hot spot and a handful of residents at
different distances.  Vulnerable residents are warned at lower risk and from
farther away than the general public; one asthmatic resident also breathes
poor air and gets a flare-up warning.  Alerts go to an NDJSON log.

    python demos/alert_walkthrough.py [log_path]
"""

import datetime as dt
import sys

import numpy as np

from firecast.alert import Category, UserProfile, default_rules, dispatch, evaluate_alerts
from firecast.grid import Indicator, RasterFrame
from firecast.ingest import synth_spec

DAY = dt.date(2020, 9, 1)


def main(log_path="alerts_demo.ndjson"):
    spec = synth_spec(32, 32, 1.4)
    lats, lons = spec.center_grid()
    risk = np.zeros(spec.shape, dtype=np.float32)
    risk[15:18, 15:18] = 0.55
    risk_map = RasterFrame(spec, Indicator.FIRE_RISK, DAY, risk)

    def at(pid, r, c, *cats):
        return UserProfile(pid, float(lats[r, c]), float(lons[r, c]), frozenset(cats))

    residents = [
        at("ana", 16, 16, Category.GENERAL),               # at the hot spot, but 0.55 < 0.7
        at("ben", 20, 20, Category.RESPIRATORY),           # about 6 miles away
        at("cho", 27, 27, Category.MOBILITY_IMPAIRED),     # about 20 miles away
        at("dev", 4, 24, Category.GENERAL, Category.SENSORY_IMPAIRED),  # about 18 miles away
    ]
    # same-day air quality in raw units: smoky PM2.5 everywhere, mild weather
    raw = {Indicator.PM25: 70.0, Indicator.PM10: 40.0, Indicator.NO2: 20.0, Indicator.TEMPERATURE: 24.0}
    air = {i: RasterFrame(spec, i, DAY, np.full(spec.shape, v, dtype=np.float32)) for i, v in raw.items()}

    for rule in default_rules():
        print(f"rule {rule.category.value:18s} risk >= {rule.risk_threshold:.1f} within {rule.radius_miles:.0f} mi")
    result = evaluate_alerts(risk_map, air, residents)
    for a in result:
        print(f"{a.profile_id}: {a.trigger.value} risk {a.risk:.2f} at {a.distance_miles:.1f} mi | {a.instructions}")
    delivered = dispatch(result, log_path)
    print(f"{len(delivered.alerts)} alerts appended to {log_path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
