"""Personalized early-warning rules over predicted risk maps.

Each profile belongs to one or more vulnerability categories.  A category
rule fires when any cell within its radius reaches its risk threshold;
vulnerable categories use lower thresholds and wider radii than the general
public.  Respiratory profiles also receive a flare-up warning computed from
the local air quality and temperature.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import json
import logging
import math
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .grid import GridSpec, Indicator, RasterFrame, cell_of
from .ingest.readers import no2_ppb_to_ugm3
from .ingest.transforms import raw_values

log = logging.getLogger(__name__)

EARTH_RADIUS_MILES = 3958.8
DEFAULT_R_MIN = 5.0

# (weight %, threshold, divisor, sign): positive sign means the factor hurts above threshold
EXACERBATION_TERMS = {
    "pm25": (1.0, 12.0, 10.0, +1),
    "pm10": (0.8, 7.0, 10.0, +1),
    "no2": (2.0, 101.23, 10.0, +1),
    "temp_f": (4.7, 68.0, 1.8, -1),
}


class Category(str, enum.Enum):
    GENERAL = "general"
    RESPIRATORY = "respiratory"
    MOBILITY_IMPAIRED = "mobility_impaired"
    SENSORY_IMPAIRED = "sensory_impaired"
    MENTAL_CONDITION = "mental_condition"


class Trigger(str, enum.Enum):
    WILDFIRE_RISK = "wildfire_risk"
    EXACERBATION_RISK = "exacerbation_risk"


class Delivery(str, enum.Enum):
    LOGGED = "logged"
    WEBHOOK_SENT = "webhook_sent"
    WEBHOOK_FAILED = "webhook_failed"


MESSAGE_TEMPLATES = {
    "general": "Elevated wildfire risk near you. Follow local news and be ready to leave.",
    "respiratory": "Wildfire smoke likely near you: stay indoors and wear masks.",
    "mobility_impaired": "Wildfire risk near you. Arrange transport and plan an early evacuation.",
    "sensory_impaired": "Wildfire risk near you. Ask a contact to relay official evacuation notices.",
    "mental_condition": "Wildfire risk near you. Keep your support contacts close and review your plan.",
    "exacerbation": "Air quality may trigger respiratory symptoms: stay indoors, wear a mask, keep medication ready.",
}


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class UserProfile:
    id: str
    lat: float
    lon: float
    categories: frozenset[Category]
    contact: str = ""

    def __post_init__(self):
        cats = frozenset(Category(c) for c in self.categories)
        object.__setattr__(self, "categories", cats)
        if not cats:
            raise ValueError(f"profile {self.id!r} needs at least one category")
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"profile {self.id!r} location must be finite")

    @classmethod
    def from_dict(cls, d: Mapping) -> "UserProfile":
        return cls(str(d["id"]), float(d["lat"]), float(d["lon"]), frozenset(d["categories"]), str(d.get("contact", "")))

    def to_dict(self) -> dict:
        return {
            "id": self.id, "lat": self.lat, "lon": self.lon,
            "categories": sorted(c.value for c in self.categories), "contact": self.contact,
        }


@dataclass(frozen=True)
class AlertRule:
    category: Category
    risk_threshold: float
    radius_miles: float
    template: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        if not 0.0 < self.risk_threshold <= 1.0:
            raise RuleError(f"{self.category.value}: risk_threshold must lie in (0, 1], got {self.risk_threshold}")
        if not self.radius_miles > 0:
            raise RuleError(f"{self.category.value}: radius_miles must be > 0, got {self.radius_miles}")
        if self.template is None:
            object.__setattr__(self, "template", self.category.value)

    @classmethod
    def from_dict(cls, d: Mapping) -> "AlertRule":
        return cls(d["category"], float(d["risk_threshold"]), float(d["radius_miles"]), d.get("template"))

    def to_dict(self) -> dict:
        return {
            "category": self.category.value, "risk_threshold": self.risk_threshold,
            "radius_miles": self.radius_miles, "template": self.template,
        }


@dataclass(frozen=True)
class Alert:
    profile_id: str
    date: dt.date
    trigger: Trigger
    risk: float
    distance_miles: float
    instructions: str
    categories: tuple[str, ...] = ()
    delivery: Delivery = Delivery.LOGGED

    def to_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "date": self.date.isoformat(),
            "trigger": self.trigger.value,
            "risk": self.risk,
            "distance_miles": self.distance_miles,
            "instructions": self.instructions,
            "categories": list(self.categories),
            "delivery": self.delivery.value,
        }


@dataclass
class AlertResult:
    alerts: list[Alert]
    skipped: list[dict] = field(default_factory=list)

    def __iter__(self):
        return iter(self.alerts)

    def __len__(self):
        return len(self.alerts)

    def __getitem__(self, i):
        return self.alerts[i]


def default_rules() -> list[AlertRule]:
    rules = [AlertRule(Category.GENERAL, 0.7, 10.0)]
    rules += [AlertRule(c, 0.4, 25.0) for c in Category if c is not Category.GENERAL]
    return rules


def validate_rules(rules: Sequence[AlertRule]) -> dict[Category, AlertRule]:
    """Index rules by category, enforcing that vulnerable categories are at
    least as sensitive (threshold no higher, radius no smaller) as general."""
    table: dict[Category, AlertRule] = {}
    for r in rules:
        if r.category in table:
            raise RuleError(f"duplicate rule for category {r.category.value}")
        if r.template not in MESSAGE_TEMPLATES:
            raise RuleError(f"{r.category.value}: unknown message template {r.template!r}")
        table[r.category] = r
    general = table.get(Category.GENERAL)
    if general is not None:
        for cat, r in table.items():
            if cat is Category.GENERAL:
                continue
            if r.risk_threshold > general.risk_threshold or r.radius_miles < general.radius_miles:
                raise RuleError(
                    f"{cat.value}: threshold {r.risk_threshold} / radius {r.radius_miles} is less sensitive than "
                    f"general {general.risk_threshold} / {general.radius_miles}"
                )
    return table


def load_rules(path) -> list[AlertRule]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise RuleError("rules file must hold a JSON array")
    rules = [AlertRule.from_dict(d) for d in raw]
    validate_rules(rules)
    return rules


def save_rules(path, rules: Sequence[AlertRule]) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in rules], indent=2) + "\n")


def load_profiles(path) -> list[UserProfile]:
    return [UserProfile.from_dict(d) for d in json.loads(Path(path).read_text())]


def exacerbation_risk(pm25: float, pm10: float, no2_ugm3: float, temp_f: float) -> float:
    """Percent increase in respiratory flare-up risk.

    Each factor contributes a linear excess over its threshold and nothing
    below it; terms are floored individually before summing.
    """
    values = {"pm25": pm25, "pm10": pm10, "no2": no2_ugm3, "temp_f": temp_f}
    for name in ("pm25", "pm10", "no2"):
        if not values[name] >= 0:
            raise ValueError(f"{name} concentration must be >= 0, got {values[name]}")
    if not math.isfinite(temp_f):
        raise ValueError(f"temperature must be finite, got {temp_f}")
    total = 0.0
    for name, (weight, threshold, divisor, sign) in EXACERBATION_TERMS.items():
        total += max(0.0, weight * sign * (values[name] - threshold) / divisor)
    return total


def celsius_to_fahrenheit(c):
    return np.asarray(c) * 9.0 / 5.0 + 32.0


def haversine_miles(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _exacerbation_at(frames: Mapping[Indicator, RasterFrame], cell) -> float:
    need = (Indicator.PM25, Indicator.PM10, Indicator.NO2, Indicator.TEMPERATURE)
    missing = [i.value for i in need if i not in frames]
    if missing:
        raise ValueError(f"exacerbation risk needs indicator frames {missing}")
    r, c = cell
    v = {i: float(raw_values(frames[i])[r, c]) for i in need}
    return exacerbation_risk(
        max(v[Indicator.PM25], 0.0),
        max(v[Indicator.PM10], 0.0),
        float(no2_ppb_to_ugm3(max(v[Indicator.NO2], 0.0))),
        float(celsius_to_fahrenheit(v[Indicator.TEMPERATURE])),
    )


def evaluate_alerts(
    risk_map: RasterFrame,
    indicator_frames: Mapping[Indicator, RasterFrame] | None,
    profiles: Iterable[UserProfile],
    rules: Sequence[AlertRule] | None = None,
    r_min: float = DEFAULT_R_MIN,
) -> AlertResult:
    """Alerts for one day's risk map, ordered by (profile id, trigger).

    A profile gets at most one wildfire alert however many of its categories
    fire; its risk is the highest qualifying cell risk and its distance the
    nearest qualifying cell.  Exacerbation alerts need ``indicator_frames``.
    """
    table = validate_rules(rules if rules is not None else default_rules())
    values = np.asarray(risk_map.values, dtype=np.float64)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("risk map values must lie in [0, 1]")
    spec: GridSpec = risk_map.spec
    lats, lons = spec.center_grid()
    trigger_order = list(Trigger)
    alerts, skipped = [], []
    for prof in sorted(profiles, key=lambda p: p.id):
        cell = cell_of(spec, prof.lat, prof.lon)
        if cell is None:
            skipped.append({"profile_id": prof.id, "reason": "outside grid"})
            continue
        dist = haversine_miles(prof.lat, prof.lon, lats, lons)
        fired, best_risk, best_dist = [], -1.0, math.inf
        for cat in Category:
            rule = table.get(cat)
            if cat not in prof.categories or rule is None:
                continue
            hits = (values >= rule.risk_threshold) & (dist <= rule.radius_miles)
            if hits.any():
                fired.append(rule)
                best_risk = max(best_risk, float(values[hits].max()))
                best_dist = min(best_dist, float(dist[hits].min()))
        if fired:
            texts = list(dict.fromkeys(MESSAGE_TEMPLATES[r.template] for r in fired))
            alerts.append(Alert(
                prof.id, risk_map.date, Trigger.WILDFIRE_RISK, best_risk, best_dist,
                " ".join(texts), tuple(r.category.value for r in fired),
            ))
        if Category.RESPIRATORY in prof.categories and indicator_frames is not None:
            risk = _exacerbation_at(indicator_frames, cell)
            if risk >= r_min:
                alerts.append(Alert(
                    prof.id, risk_map.date, Trigger.EXACERBATION_RISK, risk, 0.0,
                    MESSAGE_TEMPLATES["exacerbation"], (Category.RESPIRATORY.value,),
                ))
    alerts.sort(key=lambda a: (a.profile_id, trigger_order.index(a.trigger)))
    return AlertResult(alerts, skipped)


@dataclass
class DeliveryReport:
    alerts: list[Alert]
    log_path: str

    @property
    def counts(self) -> dict[str, int]:
        out = {d.value: 0 for d in Delivery}
        for a in self.alerts:
            out[a.delivery.value] += 1
        return out


def _post(url: str, payload: dict, timeout: float) -> bool:
    body = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return 200 <= resp.status < 300
    except (urllib.error.URLError, OSError, ValueError) as exc:
        log.warning("webhook %s failed: %s", url, exc)
        return False


def dispatch(alerts: Iterable[Alert], log_path, webhook: str | None = None, timeout: float = 5.0) -> DeliveryReport:
    """Append alerts to an NDJSON log, posting each to ``webhook`` first when set.

    Webhook failures only mark the alert; the log line is always written.
    """
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    delivered = []
    with open(log_path, "a", encoding="utf-8") as fh:
        for a in alerts:
            if webhook:
                ok = _post(webhook, a.to_dict(), timeout)
                a = dataclasses.replace(a, delivery=Delivery.WEBHOOK_SENT if ok else Delivery.WEBHOOK_FAILED)
            else:
                a = dataclasses.replace(a, delivery=Delivery.LOGGED)
            fh.write(json.dumps(a.to_dict()) + "\n")
            fh.flush()
            delivered.append(a)
    return DeliveryReport(delivered, str(log_path))
