"""Train the four ULSTM input variants and the CNN baseline on one dataset.

Every model gets the same seed, optimizer and epoch budget, and is scored on
the chronologically last 20% of windows.  The published accuracies ride
along as a reference column; at this scale they are context, not targets.

    python demos/variant_comparison.py [epochs] [days]
"""

import sys

from firecast.evaluation import compare_variants
from firecast.ingest import build_windows, synth_dataset, synth_spec
from firecast.training import TrainConfig


def main(epochs=20, days=160):
    ds = synth_dataset(synth_spec(32, 32), int(days), seed=0).transformed()
    samples = build_windows(ds.frames, ds.labels, T=7, weights=ds.weights).samples
    table = compare_variants(samples, TrainConfig(epochs=int(epochs), seed=0))
    print(f"{'model':6s} {'accuracy':>9s} {'bce':>7s} {'seconds':>8s} {'reference':>9s}")
    for r in table.rows:
        print(f"{r['model']:6s} {r['accuracy_eq3']:8.2f}% {r['bce']:7.3f} {r['train_seconds']:8.0f} "
              f"{r['reference_accuracy']:8.1f}%")
    print(table.to_csv("comparison.csv"), end="")


if __name__ == "__main__":
    main(*sys.argv[1:])
