"""Synthetic end-to-end grid: both backends, four feature kinds, several seeds.

    python3 scripts/synthetic_experiment.py --seeds 42,43,44,45,46 --out runs/synth

Each seed gets its own corpus directory and report directory; a seed-averaged
table is printed at the end.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from lidkit.features import FEATURE_KINDS
from lidkit.harness import TrainParams, evaluate, synth_corpus, train_all, training_features


def run_seed(seed, out, languages, speakers, seconds, mixtures, segments, workers):
    corpus = synth_corpus(out / f"corpus_{seed}", languages, speakers, seconds, seed)
    sets = []
    for kind in FEATURE_KINDS:
        feats = training_features(corpus, kind, workers)
        for m in mixtures:
            sets.append(train_all(corpus, kind, "gmm", TrainParams(mixtures=m), seed, workers, feats))
        sets.append(train_all(corpus, kind, "vq_dtw", TrainParams(), seed, workers, feats))
    report = evaluate(corpus, sets, segments, workers)
    report.write(out / f"report_{seed}")
    return report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="42,43,44,45,46")
    ap.add_argument("--languages", type=int, default=4)
    ap.add_argument("--speakers", type=int, default=7)
    ap.add_argument("--seconds", type=float, default=60.0)
    ap.add_argument("--mixtures", default="8")
    ap.add_argument("--segments", default="2,4,10")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/synth")
    a = ap.parse_args()
    seeds = [int(s) for s in a.seeds.split(",")]
    mixtures = [int(m) for m in a.mixtures.split(",")]
    segments = [float(s) for s in a.segments.split(",")]
    out = Path(a.out)

    rates = {}
    for seed in seeds:
        t0 = time.perf_counter()
        report = run_seed(seed, out, a.languages, a.speakers, a.seconds, mixtures, segments, a.workers)
        print(f"--- seed {seed} ({time.perf_counter() - t0:.1f} s)")
        print(report.summary())
        for key, cell in report.cells.items():
            rates.setdefault(key, []).append(cell.rate)

    print(f"=== mean over seeds {seeds} ===")
    for key in sorted(rates, key=lambda k: (k[0], FEATURE_KINDS.index(k[1]), k[2], k[3] or 0.0)):
        backend, kind, size, secs = key
        label = "whole" if secs is None else f"{secs:g}s"
        print(f"{backend:7s} {kind:5s} size={size:<3d} {label:6s} {np.mean(rates[key]):6.2f}")


if __name__ == "__main__":
    main()
