"""From a synthetic dataset to a scored risk map, step by step.

Generates a small synthetic grid, slices it into 7-day windows, trains a
compact ULSTM on the earliest 80% of days and scores it on the rest.  The
predicted | actual maps for the held-out days are written as PGM images.

    python demos/synthetic_walkthrough.py [out_dir]
"""

import sys
from pathlib import Path

from firecast.evaluation import build_for, dump_maps, evaluate, predict_maps
from firecast.ingest import build_windows, chronological_split, synth_dataset, synth_spec
from firecast.training import TrainConfig, train


def main(out_dir="walkthrough_out"):
    out = Path(out_dir)
    spec = synth_spec(16, 16)
    raw = synth_dataset(spec, days=60, seed=1)
    print(f"{len(raw.dates)} days on a {spec.rows}x{spec.cols} grid, "
          f"{100 * raw.positive_fraction():.1f}% of cell-days burning")

    # the model sees log2(x + 1) inputs, the same convention as file ingest
    ds = raw.transformed()
    samples = build_windows(ds.frames, ds.labels, T=7, weights=ds.weights).samples
    train_set, test_set = chronological_split(samples, 0.8)
    print(f"{len(train_set)} training windows, {len(test_set)} held out")

    model = build_for("V4", samples, seed=1, ulstm_overrides=dict(encoder_widths=(8, 16), hidden=64))
    model, history = train(model, train_set, TrainConfig(epochs=25, seed=1))
    print(f"{model.num_params} parameters, loss {history.loss[0]:.3f} -> {history.loss[-1]:.3f} "
          f"in {history.seconds:.0f}s")

    report = evaluate(model, test_set)
    hits = sum(r["hit"] for r in report.lead_times)
    print(f"held-out accuracy {report.accuracy_eq3:.2f}%, BCE {report.bce:.3f}, "
          f"{hits}/{len(report.lead_times)} new fire regions flagged on the day")
    out.mkdir(parents=True, exist_ok=True)
    report.to_json(out / "report.json")

    data, pred = predict_maps(model, test_set)
    paths = dump_maps(out / "maps", dict(zip(data.dates, pred)), dict(zip(data.dates, data.labels)))
    print(f"wrote {len(paths)} side-by-side maps to {out / 'maps'}")


if __name__ == "__main__":
    main(*sys.argv[1:])
