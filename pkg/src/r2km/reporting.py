"""Experiment orchestration: config, end-to-end runs, reports and maps."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .datasets import CsvSchema, load_csv, split_per_class, split_random, standardize
from .errors import DataError, ParameterError, R2kmError
from .evaluation import classification_metrics, confusion, regression_metrics
from .model_selection import SearchSpace, derive_seed, tune, write_tuning_csv
from .models import LabelCodec, ModelKind, fit_model, save_model
from .random_features import RNG_NAME, Activation

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CONFIG_VERSION = 1

NOTES = {
    "preprocessing": "features z-scored with training-split mean and population std; "
    "constant features left unscaled",
    "cv_random_layer": "RVFL random layers are re-drawn for every fold from a sub-seed",
    "pos_neg_error": "pos_error = mean of positive residuals (pred - true); "
    "neg_error = mean magnitude of negative residuals; assumed definitions",
    "multiclass": "one-vs-all with +1/-1 targets, argmax decoding, ties to lowest index",
}

# fixed base palette; classes beyond it get colors from a seeded generator
BASE_PALETTE = (
    (255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0), (255, 0, 255),
    (0, 255, 255), (176, 48, 96), (46, 139, 87), (160, 32, 240), (255, 127, 80),
    (127, 255, 212), (218, 112, 214), (160, 82, 45), (127, 255, 0), (216, 191, 216),
    (238, 0, 0),
)


class StageError(R2kmError):
    """An experiment stage failed; ``cause`` keeps the original exception."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ExperimentConfig:
    dataset_path: Path
    schema: CsvSchema = field(default_factory=CsvSchema)
    models: tuple = tuple(ModelKind)
    train_fraction: float | None = 0.7
    per_class: int | dict | None = None
    folds: int = 5
    seed: int = 42
    output_dir: Path = Path("results")
    search: SearchSpace = field(default_factory=SearchSpace)
    search_overrides: dict = field(default_factory=dict)
    palette: dict | None = None
    background: tuple = (0, 0, 0)

    def __post_init__(self):
        self.models = tuple(ModelKind.parse(m) for m in self.models)
        if not self.models:
            raise ParameterError("config lists no models")
        if (self.train_fraction is None) == (self.per_class is None):
            raise ParameterError("give exactly one of split.train_fraction or split.per_class")
        if self.seed is None:
            raise ParameterError("config needs a seed")

    @classmethod
    def from_dict(cls, raw, base_dir=Path(".")):
        version = raw.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ParameterError(f"unsupported config version {version}")
        ds = dict(raw.get("dataset", {}))
        if "path" not in ds:
            raise ParameterError("config needs dataset.path")
        coords = ds.get("coord_columns")
        schema = CsvSchema(
            label_column=ds.get("label_column", -1),
            has_header=ds.get("has_header", True),
            coord_columns=tuple(coords) if coords else None,
            task=ds.get("task", "classification"),
            background_label=ds.get("background_label"),
        )
        split = raw.get("split", {"train_fraction": 0.7})
        overrides = dict(raw.get("search", {}))
        palette = raw.get("palette")
        if palette is not None:
            palette = {str(k): tuple(int(c) for c in v) for k, v in palette.items()}
        return cls(
            dataset_path=(base_dir / ds["path"]),
            schema=schema,
            models=tuple(raw.get("models", [m.value for m in ModelKind])),
            train_fraction=split.get("train_fraction"),
            per_class=split.get("per_class"),
            folds=int(raw.get("folds", 5)),
            seed=int(raw.get("seed", 42)),
            output_dir=base_dir / raw.get("output_dir", "results"),
            search=SearchSpace.from_dict(overrides),
            search_overrides=overrides,
            palette=palette,
            background=tuple(raw.get("map", {}).get("background", (0, 0, 0))),
        )

    def echo(self):
        return {
            "dataset": {
                "path": self.dataset_path.name,
                "label_column": self.schema.label_column,
                "has_header": self.schema.has_header,
                "coord_columns": list(self.schema.coord_columns or []) or None,
                "task": self.schema.task,
                "background_label": self.schema.background_label,
            },
            "models": [m.value for m in self.models],
            "split": {"train_fraction": self.train_fraction, "per_class": self.per_class},
            "folds": self.folds,
            "seed": self.seed,
            "search_overrides": self.search_overrides,
        }


def load_config(path, **overrides):
    """Read a TOML experiment config; relative paths resolve against its folder.

    Keyword ``overrides`` replace top-level config entries (seed, output_dir, ...).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such config: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(raw, path.parent)


# -------------------------------------------------------------------- maps


def default_palette(class_names):
    palette = {}
    gen = np.random.Generator(np.random.PCG64(0))
    for i, name in enumerate(class_names):
        if i < len(BASE_PALETTE):
            palette[str(name)] = BASE_PALETTE[i]
        else:
            palette[str(name)] = tuple(int(v) for v in gen.integers(0, 256, 3))
    return palette


def render_map(predictions, coords, shape, palette, background=(0, 0, 0)):
    """Binary PPM (P6) bytes of a scene; pixels not listed get ``background``."""
    height, width = (int(v) for v in shape)
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = np.asarray(background, dtype=np.uint8)
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    if len(coords) != len(predictions):
        raise DataError(f"{len(predictions)} predictions for {len(coords)} coordinates")
    if len(coords) and (
        coords.min() < 0 or coords[:, 0].max() >= height or coords[:, 1].max() >= width
    ):
        raise DataError(f"pixel coordinate outside the {height}x{width} scene")
    for (r, c), label in zip(coords, predictions):
        key = str(label)
        if key not in palette:
            raise DataError(f"palette has no color for class {key!r}")
        img[r, c] = palette[key]
    return b"P6\n%d %d\n255\n" % (width, height) + img.tobytes()


def read_palette(path):
    """CSV rows of ``class,r,g,b``; a header row is skipped if non-numeric."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such palette: {path}")
    palette = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DataError(f"{path}: line {line} needs class,r,g,b")
            try:
                rgb = tuple(int(v) for v in row[1:])
            except ValueError:
                if line == 1:
                    continue
                raise DataError(f"{path}: bad color on line {line}") from None
            if any(not 0 <= v <= 255 for v in rgb):
                raise DataError(f"{path}: color out of range on line {line}")
            palette[row[0].strip()] = rgb
    return palette


# ----------------------------------------------------------------- running


def _jsonable_params(params):
    return {
        k: (v.name if isinstance(v, Activation) else v) for k, v in params.items()
    }


def _split(config, data):
    if config.per_class is not None:
        return split_per_class(data, config.per_class, config.seed)
    return split_random(data, config.train_fraction, config.seed)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (R2kmError, OSError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _evaluate_model(config, kind, train, test, data, jobs, staging):
    timings = {}
    t0 = time.perf_counter()
    result = _stage(
        f"tune:{kind.value}", tune, kind, train, config.search, config.folds, config.seed, jobs
    )
    timings["tune_s"] = time.perf_counter() - t0

    codec = LabelCodec(tuple(range(data.n_classes))) if data.is_classification else None
    tr, (te,), scaler = standardize(train, [test])
    t0 = time.perf_counter()
    refit_seed = derive_seed(config.seed, result.best_index, -1)
    model = _stage(
        f"fit:{kind.value}", fit_model, kind, tr.x, tr.y, result.best_params, codec, refit_seed
    )
    timings["fit_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    entry = {
        "best_params": _jsonable_params(result.best_params),
        "best_index": result.best_index,
        "cv_score": result.best_score,
        "refit_seed": refit_seed,
    }
    if codec is not None:
        pred = _stage(f"predict:{kind.value}", model.predict_indices, te.x)
        cm = confusion(te.y, pred, data.n_classes)
        entry["confusion"] = cm.tolist()
        entry["metrics"] = classification_metrics(cm).as_dict()
        entry["y_pred"] = pred.tolist()
    else:
        pred = _stage(f"predict:{kind.value}", model.predict, te.x)
        entry["metrics"] = regression_metrics(te.y, pred).as_dict()
        entry["y_pred"] = [float(v) for v in pred]
    timings["predict_s"] = time.perf_counter() - t0

    sub = staging / kind.value
    sub.mkdir()
    write_tuning_csv(sub / "tuning_scores.csv", result)
    extra = {"scaler_mean": scaler.mean, "scaler_std": scaler.std}
    if data.class_names:
        extra["class_names"] = np.array([str(c) for c in data.class_names])
    save_model(sub / "model.npz", model, extra=extra)
    if codec is not None and data.coords is not None:
        labels = _stage(f"map:{kind.value}", model.predict_indices, scaler.transform(data.x))
        entry["map"] = {"predicted": labels.tolist()}
        names = [data.class_names[i] for i in labels]
        palette = config.palette or default_palette(data.class_names)
        ppm = _stage(
            f"map:{kind.value}",
            render_map,
            names,
            data.coords,
            data.scene_shape,
            palette,
            config.background,
        )
        (sub / "map.ppm").write_bytes(ppm)
    return entry, timings


def _metrics_csv(report):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    kinds = list(report["models"])
    w.writerow(["row", *kinds])
    models = report["models"]
    if report["dataset"]["task"] == "classification":
        for i, name in enumerate(report["dataset"]["class_names"]):
            w.writerow([name, *(_cell(models[k]["metrics"]["per_class"][i]) for k in kinds)])
        for key in ("oa", "aa", "kappa"):
            w.writerow([key, *(_cell(models[k]["metrics"][key]) for k in kinds)])
    else:
        for key in ("rmse", "mae", "pos_error", "neg_error"):
            w.writerow([key, *(_cell(models[k]["metrics"][key]) for k in kinds)])
    return out.getvalue()


def _cell(v):
    return "" if v is None else repr(float(v))


def _counts(y, n_classes):
    return np.bincount(y, minlength=n_classes).tolist()


def run_experiment(config, jobs=1):
    """Load, split, tune, refit, evaluate and write all artifacts.

    Outputs land in ``config.output_dir``: ``report.json``, ``metrics.csv``
    and per model ``<kind>/tuning_scores.csv``, ``<kind>/model.npz`` and
    (for datasets with pixel coordinates) ``<kind>/map.ppm``. Files are
    staged in a temporary folder and moved into place only on success.
    """
    data = _stage("load", load_csv, config.dataset_path, config.schema)
    train, test = _stage("split", _split, config, data)

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    try:
        report = {
            "schema_version": SCHEMA_VERSION,
            "config": config.echo(),
            "environment": {
                "package": __version__,
                "rng": RNG_NAME,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "notes": NOTES,
            "dataset": {
                "task": data.task,
                "n_samples": len(data),
                "n_features": data.n_features,
                "class_names": list(data.class_names) if data.class_names else None,
                "n_train": len(train),
                "n_test": len(test),
            },
            "models": {},
            "timings": {},
        }
        if data.is_classification:
            report["dataset"]["train_counts"] = _counts(train.y, data.n_classes)
            report["dataset"]["test_counts"] = _counts(test.y, data.n_classes)
            report["y_true"] = test.y.tolist()
        else:
            report["y_true"] = [float(v) for v in test.y]
        if data.coords is not None:
            report["scene"] = {
                "shape": list(data.scene_shape),
                "coords": data.coords.tolist(),
                "background": list(config.background),
            }

        for kind in config.models:
            log.info("running %s", kind.value)
            entry, timings = _evaluate_model(config, kind, train, test, data, jobs, staging)
            report["models"][kind.value] = entry
            report["timings"][kind.value] = timings

        (staging / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=False) + "\n", encoding="utf-8"
        )
        (staging / "metrics.csv").write_text(_metrics_csv(report), encoding="utf-8")
        for item in staging.iterdir():
            target = out_dir / item.name
            if target.is_dir():
                shutil.rmtree(target)
            os.replace(item, target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return report


def tune_only(config, jobs=1):
    """Tuning stage alone: returns ``{kind: TuneResult}`` and writes score tables."""
    data = _stage("load", load_csv, config.dataset_path, config.schema)
    train, _ = _stage("split", _split, config, data)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    for kind in config.models:
        res = _stage(
            f"tune:{kind.value}", tune, kind, train, config.search, config.folds, config.seed, jobs
        )
        results[kind] = res
        write_tuning_csv(out_dir / f"tuning_scores_{kind.value}.csv", res)
    return results


def strip_timings(report):
    return {k: v for k, v in report.items() if k != "timings"}


def render_report_map(report, kind, palette=None):
    """Re-render a model's map from the predictions embedded in a report."""
    if "scene" not in report:
        raise DataError("report has no pixel coordinates")
    models = report["models"]
    if kind is None:
        kind = next(iter(models))
    if kind not in models or "map" not in models[kind]:
        raise DataError(f"report has no map predictions for {kind!r}")
    names = report["dataset"]["class_names"]
    labels = [names[i] for i in models[kind]["map"]["predicted"]]
    scene = report["scene"]
    return render_map(
        labels,
        scene["coords"],
        scene["shape"],
        palette or default_palette(names),
        tuple(scene.get("background", (0, 0, 0))),
    )

