"""``firecast`` command line: ingest, synth, train, predict, evaluate, alert, compare.

Every command writes a ``manifest.json`` into its output directory holding
the resolved configuration, the seed, SHA-256 digests of the inputs and the
list of outputs.  Option values resolve as: command-line flag, then the
``--config`` JSON file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alert import RuleError, default_rules, dispatch, evaluate_alerts, load_profiles, load_rules
from .evaluation import compare_variants, dump_maps, evaluate, predict_maps, write_pgm
from .grid import DYNAMIC_INDICATORS, GridFormatError, GridSpec, Indicator, RasterFrame, read_grid, write_grid
from .ingest import (
    CsvParseError,
    FireRule,
    build_windows,
    chronological_split,
    ingest_files,
    synth_dataset,
    synth_spec,
)
from .model import CnnConfig, ConfigError, UlstmConfig, build_cnn_baseline, build_ulstm, load_model, variant_config
from .store import grid_name, read_dataset, write_dataset
from .training import TrainConfig, train

log = logging.getLogger("firecast")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
MANIFEST_NAME = "manifest.json"
RISK_DIR = "fire_risk"

DEFAULTS = {
    "ingest": {"power": 2.0, "start": None, "end": None, "fires": None},
    "synth": {"days": 160, "rows": 32, "cols": 32, "cell_size_miles": 1.4, "start": "2018-06-01",
              "smoothness": 2.0, "persistence": 0.98, "noise": 1.0,
              "temp_quantile": 0.85, "dew_quantile": 0.15, "run_days": 3},
    "train": {"model": "V4", "epochs": 30, "batch_size": 8, "lr": 1e-3, "optimizer": "adam", "precision": 32,
              "loss_weighting": False, "patience": None, "T": 7, "horizon": 1, "hidden": 256,
              "readout": "last", "include_geo": False, "train_fraction": 0.8},
    "predict": {"dates": None, "pgm": False},
    "evaluate": {"split": "holdout", "train_fraction": 0.8, "threshold": 0.5, "t_int": 7, "pgm": False},
    "alert": {"rules": None, "data": None, "webhook": None, "r_min": 5.0},
    "compare": {"epochs": 30, "batch_size": 8, "lr": 1e-3, "optimizer": "adam", "precision": 32,
                "loss_weighting": False, "T": 7, "train_fraction": 0.8, "variants": "V1,V2,V3,V4,CNN"},
}


class CliError(Exception):
    """Invalid configuration or inputs; reported without a traceback."""

    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


# -- helpers -------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def digest_inputs(paths) -> dict[str, str]:
    """Content hashes of input files; directories are hashed file by file."""
    out = {}
    for p in paths:
        if p is None:
            continue
        p = Path(p)
        if p.is_dir():
            for f in sorted(x for x in p.rglob("*") if x.is_file()):
                out[str(f)] = sha256_file(f)
        elif p.exists():
            out[str(p)] = sha256_file(p)
    return out


def write_manifest(out_dir, command: str, config: dict, seed, inputs, outputs) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "config": config,
        "inputs": digest_inputs(inputs),
        "outputs": sorted(str(p) for p in outputs),
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def resolve(args, command: str) -> dict:
    cfg = dict(DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise CliError(f"config {args.config} must hold a JSON object")
        # flat keys apply to every command; a per-command section overrides them
        section = raw.get(command) if isinstance(raw.get(command), dict) else {}
        for layer in (raw, section):
            cfg.update({k.replace("-", "_"): v for k, v in layer.items() if not isinstance(v, dict)})
    for k, v in vars(args).items():
        if v is not None and k not in ("func", "config", "command"):
            cfg[k] = v
    if "seed" not in cfg or cfg["seed"] is None:
        cfg["seed"] = 0
    return cfg


def _date(text) -> dt.date | None:
    if text is None or isinstance(text, dt.date):
        return text
    try:
        return dt.date.fromisoformat(str(text))
    except ValueError:
        raise CliError(f"invalid date {text!r} (expected YYYY-MM-DD)") from None


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, [], "")]
    if missing:
        raise CliError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _load_spec(path) -> GridSpec:
    try:
        raw = json.loads(Path(path).read_text())
        return GridSpec.from_dict(raw)
    except FileNotFoundError:
        raise CliError(f"grid spec {path} not found", 1) from None
    except (json.JSONDecodeError, ValueError, TypeError, AttributeError) as exc:
        raise CliError(f"invalid grid spec {path}: {exc}") from None


def _read_data(path):
    try:
        return read_dataset(path)
    except FileNotFoundError as exc:
        raise CliError(str(exc), 1) from None


def _load_model(path):
    try:
        return load_model(path)
    except (FileNotFoundError, ConfigError, ValueError) as exc:
        raise CliError(f"cannot load model from {path}: {exc}", 1) from None


def _windows(ds, T, horizon, channels, include_geo):
    if not ds.labels:
        raise CliError("dataset has no fire labels", 1)
    have = set(ds.frames)
    missing = [c.value for c in channels if c not in have]
    if missing:
        raise CliError(f"dataset lacks indicator grids {missing}", 1)
    static = ds.static if include_geo else ()
    if include_geo and len(static) != 2:
        raise CliError("include_geo needs elevation and ndvi grids under static/", 1)
    report = build_windows(ds.frames, ds.labels, T, horizon, channels, static, ds.weights or None)
    if not report.samples:
        raise CliError(f"no complete {T}-day windows in the dataset", 1)
    return report


def _train_config(cfg) -> TrainConfig:
    try:
        return TrainConfig(
            epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]), lr=float(cfg["lr"]),
            optimizer=cfg["optimizer"], seed=int(cfg["seed"]), precision=int(cfg["precision"]),
            loss_weighting=bool(cfg["loss_weighting"]),
            patience=None if cfg.get("patience") is None else int(cfg["patience"]),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None


# -- commands ------------------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = resolve(args, "ingest")
    _require(cfg, "sensors", "spec", "out")
    spec = _load_spec(cfg["spec"])
    for p in list(cfg["sensors"]) + ([cfg["fires"]] if cfg.get("fires") else []):
        if not Path(p).is_file():
            raise CliError(f"input file {p} not found", 1)
    try:
        report = ingest_files(spec, cfg["sensors"], cfg.get("fires"), _date(cfg.get("start")),
                              _date(cfg.get("end")), float(cfg["power"]))
    except CsvParseError as exc:
        raise CliError(f"parse error: {exc}", 1) from None
    out = Path(cfg["out"])
    written = write_dataset(out, report.dataset)
    gaps_path = out / "gaps.json"
    gaps_path.write_text(json.dumps({
        "gaps": report.gap_dict(),
        "rejected_rows": {k: [[n, why] for n, why in v] for k, v in report.rejected.items()},
        "clipped_cells": report.clipped_cells,
    }, indent=2) + "\n")
    write_manifest(out, "ingest", cfg, cfg["seed"], list(cfg["sensors"]) + [cfg.get("fires"), cfg["spec"]],
                   written + [gaps_path, out / "spec.json"])
    log.info("wrote %d grid files to %s (%d gap days)", len(written), out, len(report.gaps))
    print(f"{len(written)} grids written to {out}")
    return 0


def cmd_synth(args) -> int:
    cfg = resolve(args, "synth")
    _require(cfg, "out")
    try:
        spec = synth_spec(int(cfg["rows"]), int(cfg["cols"]), float(cfg["cell_size_miles"]))
        rule = FireRule(float(cfg["temp_quantile"]), float(cfg["dew_quantile"]), int(cfg["run_days"]))
        ds = synth_dataset(spec, int(cfg["days"]), int(cfg["seed"]), rule, _date(cfg["start"]),
                           float(cfg["smoothness"]), float(cfg["persistence"]), float(cfg["noise"]))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = Path(cfg["out"])
    written = write_dataset(out, ds.transformed())
    write_manifest(out, "synth", cfg, cfg["seed"], [], written + [out / "spec.json"])
    print(f"{len(written)} grids written to {out} (fire fraction {ds.positive_fraction():.4f})")
    return 0


def build_model(cfg, channels_present, rows, cols):
    name = str(cfg["model"]).upper()
    geo = bool(cfg["include_geo"])
    try:
        if name == "CNN":
            ccfg = CnnConfig(channels=variant_config("V4"), T=int(cfg["T"]), rows=rows, cols=cols,
                             include_geo=geo, horizon=int(cfg["horizon"]), seed=int(cfg["seed"]))
            return build_cnn_baseline(ccfg)
        ucfg = UlstmConfig(channels=variant_config(name), T=int(cfg["T"]), rows=rows, cols=cols,
                           hidden=int(cfg["hidden"]), readout=cfg["readout"], include_geo=geo,
                           horizon=int(cfg["horizon"]), seed=int(cfg["seed"]))
        return build_ulstm(ucfg)
    except (ConfigError, ValueError) as exc:
        raise CliError(f"model config: {exc}") from None


def cmd_train(args) -> int:
    cfg = resolve(args, "train")
    _require(cfg, "data", "out")
    tcfg = _train_config(cfg)
    ds = _read_data(cfg["data"])
    model = build_model(cfg, set(ds.frames), *ds.spec.shape)
    report = _windows(ds, int(cfg["T"]), int(cfg["horizon"]), model.config.channels, bool(cfg["include_geo"]))
    train_set, held = chronological_split(report.samples, float(cfg["train_fraction"]))
    if not train_set:
        raise CliError("training split is empty", 1)
    validation = None
    if tcfg.patience is not None:
        # hold back the tail of the training period; the test split stays unseen
        n_val = max(1, len(train_set) // 10)
        train_set, validation = train_set[:-n_val], train_set[-n_val:]
        if not train_set:
            raise CliError("too few samples to hold back a validation tail", 1)
    model, history = train(model, train_set, tcfg, validation)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    model.save(out)
    hist_path = out / "history.json"
    hist_path.write_text(json.dumps({
        **history.to_dict(),
        "train_dates": [s.target_date.isoformat() for s in train_set],
        "holdout_dates": [s.target_date.isoformat() for s in held],
    }, indent=2) + "\n")
    outputs = [out / n for n in ("params.json", "params.bin", "config.json")] + [hist_path]
    write_manifest(out, "train", cfg, cfg["seed"], [cfg["data"]], outputs)
    print(f"trained {model.kind} ({model.num_params} params) final loss {history.loss[-1]:.5f}")
    return 0


def _window_array(ds, channels, T, horizon, target):
    last = target - dt.timedelta(days=horizon)
    days = [last - dt.timedelta(days=T - 1 - k) for k in range(T)]
    try:
        return np.stack([np.stack([ds.frames[c][d].values for c in channels]) for d in days])
    except KeyError:
        return None


def cmd_predict(args) -> int:
    cfg = resolve(args, "predict")
    _require(cfg, "model", "data", "out")
    model = _load_model(cfg["model"])
    ds = _read_data(cfg["data"])
    mc = model.config
    if (mc.rows, mc.cols) != ds.spec.shape:
        raise CliError(f"model grid {mc.rows}x{mc.cols} does not match data grid {ds.spec.shape}", 1)
    if cfg.get("dates"):
        targets = [_date(d) for d in cfg["dates"]]
    else:
        last = max(d for by_day in ds.frames.values() for d in by_day)
        targets = [last + dt.timedelta(days=mc.horizon)]
    static = None
    if model.n_static:
        static = np.stack([f.values for f in ds.static])
    out = Path(cfg["out"])
    (out / RISK_DIR).mkdir(parents=True, exist_ok=True)
    written = []
    for target in targets:
        w = _window_array(ds, mc.channels, mc.T, mc.horizon, target)
        if w is None:
            raise CliError(f"incomplete {mc.T}-day input window for target {target}", 1)
        risk = model.predict(w, static)
        frame = RasterFrame(ds.spec, Indicator.FIRE_RISK, target, risk)
        path = out / RISK_DIR / grid_name(target)
        write_grid(frame, path)
        written.append(path)
        if cfg.get("pgm"):
            pgm = path.with_suffix(".pgm")
            write_pgm(pgm, risk)
            written.append(pgm)
    write_manifest(out, "predict", cfg, cfg["seed"], [cfg["model"], cfg["data"]], written)
    print(f"{len(targets)} risk map(s) written to {out / RISK_DIR}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve(args, "evaluate")
    _require(cfg, "model", "data", "out")
    model = _load_model(cfg["model"])
    ds = _read_data(cfg["data"])
    mc = model.config
    report = _windows(ds, mc.T, mc.horizon, mc.channels, bool(model.n_static))
    if cfg["split"] == "holdout":
        _, samples = chronological_split(report.samples, float(cfg["train_fraction"]))
    elif cfg["split"] == "all":
        samples = report.samples
    else:
        raise CliError(f"split must be 'holdout' or 'all', got {cfg['split']!r}")
    if not samples:
        raise CliError("evaluation split is empty", 1)
    rep = evaluate(model, samples, float(cfg["threshold"]), int(cfg["t_int"]))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    rep_path = out / "report.json"
    rep.to_json(rep_path)
    csv_path = out / "confusion.csv"
    lines = ["date,tp,fp,fn,tn"] + [f"{c['date']},{c['tp']},{c['fp']},{c['fn']},{c['tn']}" for c in rep.confusion]
    csv_path.write_text("\n".join(lines) + "\n")
    outputs = [rep_path, csv_path]
    if cfg.get("pgm"):
        data, pred = predict_maps(model, samples)
        outputs += dump_maps(out / "maps", dict(zip(data.dates, pred)), dict(zip(data.dates, data.labels)))
    write_manifest(out, "evaluate", cfg, cfg["seed"], [cfg["model"], cfg["data"]], outputs)
    print(f"accuracy {rep.accuracy_eq3:.3f}%  bce {rep.bce:.5f}  ({rep.n_samples} days)")
    return 0


def cmd_alert(args) -> int:
    cfg = resolve(args, "alert")
    _require(cfg, "risk", "profiles", "out")
    try:
        risk = read_grid(cfg["risk"])
    except FileNotFoundError:
        raise CliError(f"risk map {cfg['risk']} not found", 1) from None
    try:
        rules = load_rules(cfg["rules"]) if cfg.get("rules") else default_rules()
        profiles = load_profiles(cfg["profiles"])
    except FileNotFoundError as exc:
        raise CliError(f"missing input: {exc.filename}", 1) from None
    except (RuleError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"invalid rules/profiles: {exc}") from None
    frames = None
    if cfg.get("data"):
        ds = _read_data(cfg["data"])
        frames = {ind: by_day[risk.date] for ind, by_day in ds.frames.items() if risk.date in by_day}
        if not frames:
            log.warning("no indicator grids for %s; exacerbation alerts skipped", risk.date)
            frames = None
    try:
        result = evaluate_alerts(risk, frames, profiles, rules, float(cfg["r_min"]))
    except ValueError as exc:
        raise CliError(str(exc), 1) from None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "alerts.ndjson"
    delivered = dispatch(result.alerts, log_path, cfg.get("webhook"))
    skip_path = out / "skipped.json"
    skip_path.write_text(json.dumps(result.skipped, indent=2) + "\n")
    write_manifest(out, "alert", cfg, cfg["seed"], [cfg["risk"], cfg["profiles"], cfg.get("rules"), cfg.get("data")],
                   [log_path, skip_path])
    print(f"{len(delivered.alerts)} alert(s) {delivered.counts}; {len(result.skipped)} profile(s) skipped")
    return 0


def cmd_compare(args) -> int:
    cfg = resolve(args, "compare")
    _require(cfg, "data", "out")
    cfg.setdefault("patience", None)
    tcfg = _train_config(cfg)
    ds = _read_data(cfg["data"])
    report = _windows(ds, int(cfg["T"]), 1, DYNAMIC_INDICATORS, False)
    variants = [v.strip().upper() for v in str(cfg["variants"]).split(",") if v.strip()]
    try:
        table = compare_variants(report.samples, tcfg, variants, float(cfg["train_fraction"]))
    except (ValueError, KeyError) as exc:
        raise CliError(str(exc), 1) from None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    js, cs = out / "comparison.json", out / "comparison.csv"
    table.to_json(js)
    table.to_csv(cs)
    write_manifest(out, "compare", cfg, cfg["seed"], [cfg["data"]], [js, cs])
    print(table.to_csv(), end="")
    return 0


# -- parser --------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON file of option values (flags take precedence)")
    p.add_argument("--seed", type=int, help="seed for every random draw (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="firecast", description="Gridded wildfire risk forecasting and alerting.")
    parser.add_argument("--version", action="version", version=f"firecast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="grid sensor and fire CSVs")
    _common(p)
    p.add_argument("--sensors", nargs="+", help="sensor CSV file(s)")
    p.add_argument("--fires", help="fire detection CSV")
    p.add_argument("--spec", help="grid spec JSON")
    p.add_argument("--out", help="dataset directory to write")
    p.add_argument("--start", help="first day (YYYY-MM-DD)")
    p.add_argument("--end", help="last day (YYYY-MM-DD)")
    p.add_argument("--power", type=float, help="IDW distance power")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _common(p)
    p.add_argument("--out")
    p.add_argument("--days", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--cell-size-miles", type=float)
    p.add_argument("--start")
    p.add_argument("--smoothness", type=float)
    p.add_argument("--persistence", type=float)
    p.add_argument("--noise", type=float, help="scale of weather unrelated to the latent heat field")
    p.add_argument("--temp-quantile", type=float)
    p.add_argument("--dew-quantile", type=float)
    p.add_argument("--run-days", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a ULSTM variant or the CNN baseline")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--out", help="checkpoint directory")
    p.add_argument("--model", help="V1, V2, V3, V4 or CNN")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--precision", type=int, choices=[32, 64])
    p.add_argument("--loss-weighting", action="store_true", default=None)
    p.add_argument("--patience", type=int)
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--horizon", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--readout", choices=["last", "mean"])
    p.add_argument("--include-geo", action="store_true", default=None)
    p.add_argument("--train-fraction", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="emit risk-map grids")
    _common(p)
    p.add_argument("--model", help="checkpoint directory")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--dates", nargs="+", help="target days (default: day after the last data day)")
    p.add_argument("--pgm", action="store_true", default=None, help="also write PGM renders")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a checkpoint")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--split", choices=["holdout", "all"])
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--t-int", type=int)
    p.add_argument("--pgm", action="store_true", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("alert", help="turn a risk map into personalized alerts")
    _common(p)
    p.add_argument("--risk", help="risk-map grid file")
    p.add_argument("--profiles", help="profiles JSON")
    p.add_argument("--rules", help="rules JSON (default table when absent)")
    p.add_argument("--data", help="dataset directory supplying same-day indicator grids")
    p.add_argument("--out")
    p.add_argument("--webhook", help="URL receiving one POST per alert")
    p.add_argument("--r-min", type=float, help="exacerbation alert threshold in percent")
    p.set_defaults(func=cmd_alert)

    p = sub.add_parser("compare", help="train and score V1..V4 and the CNN")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--precision", type=int, choices=[32, 64])
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--variants", help="comma-separated subset of V1,V2,V3,V4,CNN")
    p.set_defaults(func=cmd_compare)
    return parser


def configure_logging():
    name = os.environ.get("WF_LOG_LEVEL", "warn").lower()
    level = LOG_LEVELS.get(name)
    if level is None:
        raise CliError(f"WF_LOG_LEVEL must be one of {sorted(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging()
        return args.func(args)
    except CliError as exc:
        print(f"firecast {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except (GridFormatError, ConfigError) as exc:
        print(f"firecast {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
