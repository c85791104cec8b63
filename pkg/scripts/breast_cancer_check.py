#!/usr/bin/env python3
"""Soft accuracy check of tuned R2KM on the Wisconsin diagnostic breast cancer data.

The data ship with scikit-learn (569 samples, 30 features). They are written
to CSV and run through the normal experiment pipeline with a 70/30 split,
5-fold tuning over the full default grid and seed 42. The reference accuracy
of 98.57% was reported for a related UCI export, so the result is only
logged against a +/-5 point window and never fails the run.

The full grid has 1331 combinations; expect a minute or two per CPU.
"""

import argparse
import csv
import tempfile
from pathlib import Path

from sklearn.datasets import load_breast_cancer

from r2km.reporting import ExperimentConfig, run_experiment

REFERENCE = 98.57
WINDOW = 5.0


def write_csv(path):
    data = load_breast_cancer()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i}" for i in range(data.data.shape[1])] + ["label"])
        for row, target in zip(data.data, data.target):
            w.writerow([*map(repr, row.tolist()), data.target_names[target]])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", type=Path, default=None)
    args = parser.parse_args(argv)
    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "wdbc.csv"
        write_csv(csv_path)
        out = args.out or Path(tmp) / "out"
        config = ExperimentConfig(csv_path, models=("r2km",), output_dir=out)
        report = run_experiment(config, jobs=args.jobs)
    entry = report["models"]["r2km"]
    acc = 100 * entry["metrics"]["oa"]
    status = "within" if abs(acc - REFERENCE) <= WINDOW else "OUTSIDE"
    print(f"best params: {entry.get('best_params')}")
    print(f"R2KM test accuracy {acc:.2f}% ({status} {REFERENCE} +/- {WINDOW})")


if __name__ == "__main__":
    main()
