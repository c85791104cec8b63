#!/usr/bin/env python3
"""Write the two-blob scene fixture used by the tests and the example config.

The scene is a 10x12 grid. Columns 0-5 belong to class "A", columns 6-11 to
class "B", and a one-pixel frame of background ("0") surrounds both. Each
labeled pixel carries three features drawn around a class center far enough
apart that the classes are linearly separable.

Alongside the CSV a ground-truth PPM is written pixel by pixel with plain
Python, independently of the package's renderer, so tests can compare the
two byte for byte.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

HEIGHT, WIDTH = 10, 12
CENTERS = {"A": (-3.0, -3.0, 0.0), "B": (3.0, 3.0, 1.0)}
COLORS = {"0": (0, 0, 0), "A": (255, 0, 0), "B": (0, 255, 0)}


def scene_label(r, c):
    if r in (0, HEIGHT - 1) or c in (0, WIDTH - 1):
        return "0"
    return "A" if c < WIDTH // 2 else "B"


def write_scene(path, seed=7):
    gen = np.random.default_rng(seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "f1", "f2", "f3", "label"])
        for r in range(HEIGHT):
            for c in range(WIDTH):
                label = scene_label(r, c)
                center = CENTERS.get(label, (0.0, 0.0, 0.0))
                feats = [round(m + 0.5 * gen.standard_normal(), 6) for m in center]
                w.writerow([r, c, *feats, label])


def write_truth_ppm(path):
    payload = bytearray()
    for r in range(HEIGHT):
        for c in range(WIDTH):
            payload.extend(COLORS[scene_label(r, c)])
    header = f"P6\n{WIDTH} {HEIGHT}\n255\n".encode("ascii")
    Path(path).write_bytes(header + bytes(payload))


def write_palette(path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "r", "g", "b"])
        for name in ("A", "B"):
            w.writerow([name, *COLORS[name]])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).parents[1] / "tests" / "data")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    write_scene(args.out / "blob_scene.csv", args.seed)
    write_truth_ppm(args.out / "blob_scene_truth.ppm")
    write_palette(args.out / "blob_palette.csv")
    print(f"wrote fixtures to {args.out}")


if __name__ == "__main__":
    main()
