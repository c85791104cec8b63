"""Tabular ingestion, z-score scaling, and seeded splits.

HSI scenes are read from CSV exports of ``(row, col, band_1 .. band_B,
label)``. Pixels with the background label are kept out of the dataset but
still count toward the scene size used for map rendering.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError, ParameterError, ProtocolError
from .random_features import rng

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray  # class indices (int) or real targets
    task: str = CLASSIFICATION
    class_names: tuple | None = None
    coords: np.ndarray | None = None  # (n, 2) integer (row, col)
    scene_shape: tuple | None = None  # (height, width)

    def __post_init__(self):
        if len(self.y) != self.x.shape[0]:
            raise DataError(f"{len(self.y)} targets for {self.x.shape[0]} samples")
        if self.coords is not None:
            if self.coords.shape != (self.x.shape[0], 2) or np.any(self.coords < 0):
                raise DataError("pixel coordinates must be (n, 2) and nonnegative")

    def __len__(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    @property
    def n_classes(self):
        return 0 if self.class_names is None else len(self.class_names)

    @property
    def is_classification(self):
        return self.task == CLASSIFICATION

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        coords = None if self.coords is None else self.coords[idx]
        return replace(self, x=self.x[idx], y=self.y[idx], coords=coords)


@dataclass(frozen=True)
class CsvSchema:
    """How to read a delimited file.

    ``label_column`` and ``coord_columns`` are header names or 0-based
    positions; negative positions count from the end.
    """

    label_column: int | str = -1
    has_header: bool = True
    coord_columns: tuple | None = None
    task: str = CLASSIFICATION
    background_label: str | None = None


def _resolve(col, header, width, line):
    if isinstance(col, str) and not col.lstrip("-").isdigit():
        if header is None or col not in header:
            raise DataError(f"column {col!r} not found in header (line {line})")
        return header.index(col)
    pos = int(col)
    if pos < 0:
        pos += width
    if not 0 <= pos < width:
        raise DataError(f"column index {col} out of range for {width} columns")
    return pos


def load_csv(path, schema=None):
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    if schema.task not in (CLASSIFICATION, REGRESSION):
        raise ParameterError(f"unknown task {schema.task!r}")

    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    header = None
    if schema.has_header:
        if not rows:
            raise DataError(f"{path}: empty file")
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(header) if header is not None else len(rows[0][1])
    first_line = rows[0][0]
    label_pos = _resolve(schema.label_column, header, width, first_line)
    coord_pos = ()
    if schema.coord_columns is not None:
        coord_pos = tuple(_resolve(c, header, width, first_line) for c in schema.coord_columns)
        if len(coord_pos) != 2:
            raise DataError("coord_columns must name exactly two columns")
    feature_pos = [j for j in range(width) if j != label_pos and j not in coord_pos]
    if not feature_pos:
        raise DataError(f"{path}: no feature columns")

    feats, labels, coords, all_coords = [], [], [], []
    for line, row in rows:
        if len(row) != width:
            raise DataError(f"{path}: line {line} has {len(row)} fields, expected {width}")
        try:
            values = [float(row[j]) for j in feature_pos]
            pix = [int(float(row[j])) for j in coord_pos]
        except ValueError:
            bad = next(
                row[j] for j in (*feature_pos, *coord_pos) if not _is_number(row[j])
            )
            raise DataError(f"{path}: non-numeric value {bad!r} on line {line}") from None
        if not all(np.isfinite(values)):
            raise DataError(f"{path}: non-finite value on line {line}")
        label = row[label_pos].strip()
        if coord_pos:
            all_coords.append(pix)
        if schema.background_label is not None and label == schema.background_label:
            continue
        feats.append(values)
        labels.append(label)
        if coord_pos:
            coords.append(pix)

    if not feats:
        raise DataError(f"{path}: dataset is empty after removing background pixels")
    x = np.array(feats, dtype=np.float64)
    scene_shape = None
    coord_arr = None
    if coord_pos:
        coord_arr = np.array(coords, dtype=np.int64)
        every = np.array(all_coords, dtype=np.int64)
        if np.any(every < 0):
            raise DataError(f"{path}: negative pixel coordinate")
        scene_shape = tuple(int(v) + 1 for v in every.max(axis=0))

    if schema.task == REGRESSION:
        try:
            y = np.array([float(v) for v in labels])
        except ValueError:
            raise DataError(f"{path}: regression target is not numeric") from None
        return Dataset(x, y, REGRESSION, None, coord_arr, scene_shape)

    names = tuple(dict.fromkeys(labels))
    lookup = {c: i for i, c in enumerate(names)}
    y = np.array([lookup[v] for v in labels], dtype=np.int64)
    return Dataset(x, y, CLASSIFICATION, names, coord_arr, scene_shape)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x):
        if x.shape[0] == 0:
            raise DataError("cannot fit a scaler on an empty set")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        # constant features pass through untouched
        mean = np.where(constant, 0.0, mean)
        std = np.where(constant, 1.0, std)
        return cls(mean, std)

    def transform(self, x):
        return (x - self.mean) / self.std

    def __eq__(self, other):
        return (
            isinstance(other, Scaler)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
        )


def standardize(train, others=()):
    """Z-score ``train`` and ``others`` with statistics from ``train`` only.

    Returns ``(scaled_train, [scaled_others...], scaler)``.
    """
    scaler = Scaler.fit(train.x)
    scaled = [replace(d, x=scaler.transform(d.x)) for d in others]
    return replace(train, x=scaler.transform(train.x)), scaled, scaler


def split_random(d, train_fraction, seed):
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train fraction must be in (0, 1), got {train_fraction}")
    n = len(d)
    perm = rng(seed).permutation(n)
    cut = int(np.floor(train_fraction * n))
    train_idx, test_idx = np.sort(perm[:cut]), np.sort(perm[cut:])
    return d.subset(train_idx), d.subset(test_idx)


def split_indices_per_class(d, counts, seed):
    """Per-class train/test index arrays.

    ``counts`` is one integer for every class, or a mapping from class name
    (or index) to count; classes missing from a mapping raise.
    """
    if not d.is_classification:
        raise ProtocolError("per-class splits need a classification dataset")
    gen = rng(seed)
    train, test = [], []
    for c, name in enumerate(d.class_names):
        members = np.flatnonzero(d.y == c)
        if isinstance(counts, dict):
            key = name if name in counts else c if c in counts else str(c)
            if key not in counts:
                raise ProtocolError(f"no training count given for class {name!r}")
            want = int(counts[key])
        else:
            want = int(counts)
        if want < 0 or want > len(members):
            raise ProtocolError(
                f"class {name!r} has {len(members)} samples, {want} requested for training"
            )
        chosen = gen.permutation(len(members))
        train.append(members[chosen[:want]])
        test.append(members[chosen[want:]])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split_per_class(d, counts, seed):
    train_idx, test_idx = split_indices_per_class(d, counts, seed)
    return d.subset(train_idx), d.subset(test_idx)


def kfold(n, k, seed):
    """Seeded k-fold partition of ``range(n)``.

    The first ``n % k`` folds are one sample larger. Returns a list of
    ``(train_idx, val_idx)`` pairs. ``n`` may also be a Dataset.
    """
    if not isinstance(n, (int, np.integer)):
        n = len(n)
    if not 2 <= k <= n:
        raise ParameterError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = rng(seed).permutation(n)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    folds, start = [], 0
    for size in sizes:
        val = np.sort(perm[start : start + size])
        train = np.sort(np.concatenate([perm[:start], perm[start + size :]]))
        folds.append((train, val))
        start += size
    return folds
