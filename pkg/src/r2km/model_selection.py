"""Hyperparameter grids and k-fold cross-validated grid search."""

from __future__ import annotations

import csv
import hashlib
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import kfold, standardize
from .errors import ParameterError, R2kmError, TuningError
from .evaluation import regression_metrics
from .models import PARAM_NAMES, LabelCodec, ModelKind, fit_model
from .random_features import Activation

log = logging.getLogger(__name__)

POWERS_OF_TEN = tuple(10.0**i for i in range(-5, 6))
POWERS_OF_TWO = tuple(2.0**i for i in range(-5, 6))
HIDDEN_NODES = tuple(range(3, 204, 20))
ACTIVATIONS = tuple(Activation)


@dataclass(frozen=True)
class SearchSpace:
    C: tuple = POWERS_OF_TEN
    hidden_nodes: tuple = HIDDEN_NODES
    activation: tuple = ACTIVATIONS
    gamma: tuple = POWERS_OF_TEN
    eta: tuple = POWERS_OF_TEN
    lam: tuple = POWERS_OF_TEN
    sigma: tuple = POWERS_OF_TWO

    def __post_init__(self):
        for name in ("C", "gamma", "eta", "lam", "sigma"):
            values = getattr(self, name)
            if not values or any(not v > 0 for v in values):
                raise ParameterError(f"grid {name} must be nonempty and positive")
        nodes = self.hidden_nodes
        if not nodes or any(b <= a for a, b in zip(nodes, nodes[1:])) or nodes[0] < 1:
            raise ParameterError("hidden node grid must be positive and strictly increasing")
        if not self.activation:
            raise ParameterError("activation grid is empty")

    @classmethod
    def from_dict(cls, overrides):
        kwargs = {}
        for key, values in (overrides or {}).items():
            if key not in cls.__dataclass_fields__:
                raise ParameterError(f"unknown search-space key {key!r}")
            if key == "activation":
                kwargs[key] = tuple(Activation.parse(v) for v in values)
            elif key == "hidden_nodes":
                kwargs[key] = tuple(int(v) for v in values)
            else:
                kwargs[key] = tuple(float(v) for v in values)
        return cls(**kwargs)


def enumerate_grid(space, kind):
    """Cartesian product over the kind's parameters, first parameter slowest."""
    kind = ModelKind.parse(kind)
    names = PARAM_NAMES[kind]
    axes = [getattr(space, n) for n in names]
    return [dict(zip(names, combo)) for combo in itertools.product(*axes)]


def derive_seed(master, combo_index, fold_index):
    """Sub-seed for one (combination, fold); fold_index -1 is the final refit."""
    digest = hashlib.sha256(f"{master}:{combo_index}:{fold_index}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


@dataclass(frozen=True, eq=False)
class Fold:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray


@dataclass(frozen=True, eq=False)
class CvPlan:
    """Standardized folds plus what is needed to fit and score on them."""

    folds: tuple
    codec: LabelCodec | None
    seed: int


def prepare_folds(train, k, seed):
    folds = []
    for tr_idx, val_idx in kfold(len(train), k, seed):
        tr, (val,), _ = standardize(train.subset(tr_idx), [train.subset(val_idx)])
        folds.append(Fold(tr.x, tr.y, val.x, val.y))
    codec = LabelCodec(tuple(range(train.n_classes))) if train.is_classification else None
    return CvPlan(tuple(folds), codec, seed)


def score_predictions(model, x, y, codec):
    """Accuracy for classifiers, negative RMSE for regressors."""
    if codec is None:
        return -regression_metrics(y, model.predict(x)).rmse
    return float(np.mean(model.predict_indices(x) == y))


@dataclass(frozen=True)
class CvResult:
    mean: float
    fold_scores: tuple


def evaluate_plan(kind, plan, params, combo_index=0):
    scores = []
    for f, fold in enumerate(plan.folds):
        try:
            model = fit_model(
                kind,
                fold.x_train,
                fold.y_train,
                params,
                plan.codec,
                derive_seed(plan.seed, combo_index, f),
            )
            s = score_predictions(model, fold.x_val, fold.y_val, plan.codec)
        except (R2kmError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.debug("fold %d failed for %s %s: %s", f, kind, params, exc)
            s = -math.inf
        scores.append(s if math.isfinite(s) else -math.inf)
    mean = -math.inf if any(s == -math.inf for s in scores) else float(np.mean(scores))
    return CvResult(mean, tuple(scores))


def cross_validate(kind, train, params, k=5, seed=42, combo_index=0):
    """Mean validation score over ``k`` folds (-inf if any fold fails)."""
    return evaluate_plan(kind, prepare_folds(train, k, seed), params, combo_index)


@dataclass
class TuneResult:
    kind: ModelKind
    grid: list
    results: list  # CvResult per grid entry, in grid order
    best_index: int = field(init=False)

    def __post_init__(self):
        means = [r.mean for r in self.results]
        best = max(means)
        if best == -math.inf:
            raise TuningError(f"every {self.kind.value} combination failed")
        # max() over a list keeps the first maximum, i.e. the earliest grid entry
        self.best_index = means.index(best)

    @property
    def best_params(self):
        return self.grid[self.best_index]

    @property
    def best_score(self):
        return self.results[self.best_index].mean


def _evaluate_chunk(args):
    kind, plan, chunk = args
    return [(i, evaluate_plan(kind, plan, params, i)) for i, params in chunk]


def tune(kind, train, space=None, k=5, seed=42, jobs=1, scorer=None, order=None):
    """Grid search; best = highest mean CV score, earliest grid entry on ties.

    ``scorer(params, index) -> CvResult`` replaces cross-validation (used to
    inject scores). ``order`` is an optional permutation of grid indices
    giving the evaluation order; the result does not depend on it.
    """
    kind = ModelKind.parse(kind)
    grid = enumerate_grid(space or SearchSpace(), kind)
    if not grid:
        raise TuningError("empty grid")
    order = list(range(len(grid))) if order is None else list(order)
    if sorted(order) != list(range(len(grid))):
        raise ParameterError("order must be a permutation of the grid indices")

    results = [None] * len(grid)
    if scorer is not None:
        for i in order:
            results[i] = scorer(grid[i], i)
        return TuneResult(kind, grid, results)

    plan = prepare_folds(train, k, seed)
    items = [(i, grid[i]) for i in order]
    if jobs <= 1:
        for i, res in _evaluate_chunk((kind, plan, items)):
            results[i] = res
    else:
        size = max(1, math.ceil(len(items) / (4 * jobs)))
        chunks = [(kind, plan, items[s : s + size]) for s in range(0, len(items), size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_evaluate_chunk, chunks):
                for i, res in part:
                    results[i] = res
    return TuneResult(kind, grid, results)


def _fmt(value):
    if isinstance(value, Activation):
        return value.name
    return repr(value)


def write_tuning_csv(path, result):
    names = PARAM_NAMES[result.kind]
    n_folds = max(len(r.fold_scores) for r in result.results)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "mean_score", *(f"fold_{f}" for f in range(n_folds))])
        for params, res in zip(result.grid, result.results):
            w.writerow(
                [*(_fmt(params[n]) for n in names), repr(res.mean), *map(repr, res.fold_scores)]
            )
