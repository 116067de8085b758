"""Risk-map scoring: interval accuracy, confusion counts, lead times, variant comparison."""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .autodiff import bce_loss
from .grid import Indicator
from .model import (
    REFERENCE_ACCURACY,
    CnnConfig,
    UlstmConfig,
    build_cnn_baseline,
    build_ulstm,
    variant_config,
)
from .model.base import RiskModel
from .training import SampleArrays, TrainConfig, arrays_for, train
from .ingest import chronological_split

DEFAULT_THRESHOLD = 0.5
DEFAULT_T_INT = 7


def binarize(pred: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Pixelwise ``pred >= threshold`` (ties count as fire)."""
    return np.asarray(pred) >= threshold


def _by_day(maps) -> tuple[list, np.ndarray]:
    if isinstance(maps, Mapping):
        keys = sorted(maps)
        return keys, np.stack([np.asarray(maps[k], dtype=np.float64) for k in keys])
    arr = np.asarray(maps, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    return list(range(arr.shape[0])), arr


def _day_index(key):
    return key.toordinal() if isinstance(key, dt.date) else int(key)


def accuracy_eq3(
    predictions,
    labels,
    t_int: int = DEFAULT_T_INT,
    threshold: float = DEFAULT_THRESHOLD,
) -> float:
    """Interval-averaged fire-area accuracy in percent.

    For each evaluated day t0 the binarized predicted fire fraction is averaged
    over the days t0, t0-1, ..., t0-(t_int-1) for which a prediction exists and
    compared with the labelled fire fraction on t0.  The score is
    ``(1 - 0.5 * sum_t0 residual**2) * 100``; fractions are taken per cell so
    the value does not depend on grid size.

    ``predictions`` and ``labels`` are either ``{date: map}`` mappings with the
    same keys or arrays [days,H,W] whose first axis is consecutive days.
    """
    if t_int < 1:
        raise ValueError(f"t_int must be >= 1, got {t_int}")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    pk, P = _by_day(predictions)
    lk, L = _by_day(labels)
    if pk != lk:
        raise ValueError(f"prediction and label dates are misaligned ({len(pk)} vs {len(lk)} days)")
    if P.shape != L.shape:
        raise ValueError(f"prediction maps {P.shape} and label maps {L.shape} differ in shape")
    if not P.size:
        raise ValueError("nothing to score")
    cells = P[0].size
    pred_frac = binarize(P, threshold).reshape(len(pk), -1).sum(axis=1) / cells
    label_frac = L.reshape(len(pk), -1).sum(axis=1) / cells
    pos = {_day_index(k): i for i, k in enumerate(pk)}
    resid = 0.0
    for i, k in enumerate(pk):
        d0 = _day_index(k)
        window = [pred_frac[pos[d0 - t1]] for t1 in range(t_int) if (d0 - t1) in pos]
        resid += (np.mean(window) - label_frac[i]) ** 2
    return float((1.0 - 0.5 * resid) * 100.0)


def confusion_counts(pred: np.ndarray, label: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> dict:
    p = binarize(pred, threshold)
    t = np.asarray(label) > 0.5
    return {
        "tp": int(np.sum(p & t)),
        "fp": int(np.sum(p & ~t)),
        "fn": int(np.sum(~p & t)),
        "tn": int(np.sum(~p & ~t)),
    }


def lead_times(
    predictions: Mapping[dt.date, np.ndarray],
    labels: Mapping[dt.date, np.ndarray],
    threshold: float = DEFAULT_THRESHOLD,
    max_lead: int = 14,
) -> list[dict]:
    """One row per outbreak region.

    An outbreak region is a connected (4-neighbour) group of cells burning on
    day D that were not burning on D-1.  ``hit`` says whether the map for D
    reaches ``threshold`` inside the region; ``lead_days`` counts how many
    consecutive earlier maps (D-1, D-2, ...) already did.
    """
    rows = []
    one = dt.timedelta(days=1)
    for day in sorted(labels):
        lab = np.asarray(labels[day]) > 0.5
        prev = labels.get(day - one)
        new = lab & ~(np.asarray(prev) > 0.5) if prev is not None else lab
        regions, n = ndimage.label(new)
        for rid in range(1, n + 1):
            mask = regions == rid

            def flagged(d):
                p = predictions.get(d)
                return p is not None and bool(np.any(binarize(p, threshold)[mask]))

            lead = 0
            while lead < max_lead and flagged(day - (lead + 1) * one):
                lead += 1
            rows.append({
                "date": day.isoformat(),
                "region": rid,
                "cells": int(mask.sum()),
                "hit": flagged(day),
                "lead_days": lead,
            })
    return rows


@dataclass
class EvalReport:
    accuracy_eq3: float
    bce: float
    threshold: float
    t_int: int
    n_samples: int
    confusion: list[dict] = field(default_factory=list)
    lead_times: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def predict_maps(model: RiskModel, samples, batch_size: int = 16) -> tuple[SampleArrays, np.ndarray]:
    data = arrays_for(model, samples)
    out = []
    for start in range(0, len(data), batch_size):
        sl = slice(start, start + batch_size)
        st = data.static[sl] if data.static is not None else None
        out.append(model.predict(data.windows[sl], st))
    return data, np.concatenate(out).astype(np.float64)


def evaluate(
    model: RiskModel,
    samples,
    threshold: float = DEFAULT_THRESHOLD,
    t_int: int = DEFAULT_T_INT,
    max_lead: int = 14,
) -> EvalReport:
    """Score ``model`` on ``samples`` without touching its parameters."""
    data, pred = predict_maps(model, samples)
    preds = dict(zip(data.dates, pred))
    labs = dict(zip(data.dates, data.labels))
    confusion = [{"date": d.isoformat(), **confusion_counts(preds[d], labs[d], threshold)} for d in data.dates]
    return EvalReport(
        accuracy_eq3=accuracy_eq3(preds, labs, t_int, threshold),
        bce=float(bce_loss(pred, data.labels).item()),
        threshold=threshold,
        t_int=t_int,
        n_samples=len(data),
        confusion=confusion,
        lead_times=lead_times(preds, labs, threshold, max_lead),
    )


# -- comparison harness --------------------------------------------------------

COMPARISON_ROWS = ("V1", "V2", "V3", "V4", "CNN")
TABLE_FIELDS = ("model", "architecture", "channels", "accuracy_eq3", "bce", "train_seconds", "reference_accuracy")


@dataclass
class ComparisonTable:
    rows: list[dict]
    train_config: dict

    def to_json(self, path=None) -> str:
        text = json.dumps({"train_config": self.train_config, "rows": self.rows}, indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=TABLE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({**row, "channels": " ".join(row["channels"])})
        if path is not None:
            Path(path).write_text(buf.getvalue())
        return buf.getvalue()

    def row(self, name: str) -> dict:
        return next(r for r in self.rows if r["model"] == name)


def build_for(name: str, samples, seed: int = 0, ulstm_overrides=None, cnn_overrides=None) -> RiskModel:
    first = samples[0]
    rows, cols = first.spec.shape
    T = first.T
    if name == "CNN":
        cfg = CnnConfig(channels=variant_config("V4"), T=T, rows=rows, cols=cols, seed=seed, **(cnn_overrides or {}))
        return build_cnn_baseline(cfg)
    cfg = UlstmConfig(channels=variant_config(name), T=T, rows=rows, cols=cols, seed=seed, **(ulstm_overrides or {}))
    return build_ulstm(cfg)


def compare_variants(
    samples: Sequence,
    train_cfg: TrainConfig,
    variants: Sequence[str] = COMPARISON_ROWS,
    train_fraction: float = 0.8,
    threshold: float = DEFAULT_THRESHOLD,
    t_int: int = DEFAULT_T_INT,
    ulstm_overrides: dict | None = None,
    cnn_overrides: dict | None = None,
) -> ComparisonTable:
    """Train every variant with the same config and seed on a chronological
    split and score each on the held-out tail.

    ``reference_accuracy`` carries published figures as annotations only.
    """
    if not samples:
        raise ValueError("no samples to compare on")
    have = set(samples[0].channels)
    needed = {c for v in variants for c in variant_config("V4" if v == "CNN" else v)}
    missing = sorted(c.value for c in needed - have)
    if missing:
        raise ValueError(f"samples lack channels {missing} required by the comparison")
    train_set, test_set = chronological_split(samples, train_fraction)
    if not train_set or not test_set:
        raise ValueError("both the training and the held-out split must be non-empty")
    rows = []
    for name in variants:
        model = build_for(name, samples, train_cfg.seed, ulstm_overrides, cnn_overrides)
        model, hist = train(model, train_set, train_cfg)
        rep = evaluate(model, test_set, threshold, t_int)
        rows.append({
            "model": name,
            "architecture": model.kind,
            "channels": [c.value for c in model.config.channels],
            "accuracy_eq3": rep.accuracy_eq3,
            "bce": rep.bce,
            "train_seconds": round(hist.seconds, 3),
            "reference_accuracy": REFERENCE_ACCURACY[name],
        })
    return ComparisonTable(rows=rows, train_config=train_cfg.to_dict())


def write_pgm(path, image: np.ndarray) -> None:
    """Write a [0,1] map as an 8-bit binary PGM."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    h, w = img.shape
    data = np.round(img * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if m is None:
        raise ValueError(f"{path} is not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    body = raw[m.end():m.end() + w * h]
    if len(body) != w * h:
        raise ValueError(f"{path} is truncated")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w) / maxval


def dump_maps(directory, predictions: Mapping[dt.date, np.ndarray], labels: Mapping[dt.date, np.ndarray]) -> list[Path]:
    """Side-by-side predicted | actual PGM per day."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for day in sorted(predictions):
        p = np.asarray(predictions[day], dtype=np.float64)
        gap = np.ones((p.shape[0], 1))
        img = np.hstack([p, gap, np.asarray(labels[day], dtype=np.float64)])
        path = directory / f"{day.isoformat()}.pgm"
        write_pgm(path, img)
        out.append(path)
    return out
