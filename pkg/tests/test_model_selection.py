import csv
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from r2km import model_selection as ms
from r2km.datasets import Dataset, kfold
from r2km.errors import ParameterError, SingularSystemError, TuningError
from r2km.model_selection import (
    CvPlan,
    CvResult,
    SearchSpace,
    cross_validate,
    derive_seed,
    enumerate_grid,
    evaluate_plan,
    prepare_folds,
    tune,
    write_tuning_csv,
)
from r2km.random_features import Activation


def blob_dataset(seed=0, n=30):
    gen = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    x = gen.normal(size=(n, 2)) * 0.4 + np.where(y[:, None] == 0, -2.0, 2.0)
    return Dataset(x, y, class_names=("a", "b"))


def test_default_grid_sizes():
    space = SearchSpace()
    assert len(enumerate_grid(space, "r2km")) == 11 * 11 * 11 == 1331
    assert len(enumerate_grid(space, "rkm")) == 1331
    assert len(enumerate_grid(space, "rvfl")) == 11 * 11 * 9 == 1089
    assert len(enumerate_grid(space, "rvflwodl")) == 1089


def test_grid_values():
    space = SearchSpace()
    assert space.eta[0] == 1e-5 and space.eta[-1] == 1e5
    assert space.sigma[0] == 2.0**-5 and space.sigma[-1] == 32.0
    assert space.hidden_nodes == tuple(range(3, 204, 20))
    assert space.hidden_nodes[-1] == 203


def test_first_parameter_slowest():
    grid = enumerate_grid(SearchSpace(), "r2km")
    assert grid[0] == {"eta": 1e-5, "lam": 1e-5, "sigma": 2.0**-5}
    assert grid[1] == {"eta": 1e-5, "lam": 1e-5, "sigma": 2.0**-4}
    assert grid[11] == {"eta": 1e-5, "lam": 1e-4, "sigma": 2.0**-5}
    assert grid[-1] == {"eta": 1e5, "lam": 1e5, "sigma": 32.0}


def test_search_space_validation():
    with pytest.raises(ParameterError):
        SearchSpace(lam=(1.0, -1.0))
    with pytest.raises(ParameterError):
        SearchSpace(hidden_nodes=(23, 3))
    with pytest.raises(ParameterError):
        SearchSpace.from_dict({"nu": [1.0]})
    with pytest.raises(ParameterError):
        enumerate_grid(SearchSpace(), "svm")
    space = SearchSpace.from_dict({"activation": ["sine", 2], "hidden_nodes": [3.0]})
    assert space.activation == (Activation.SINE, Activation.RELU)
    assert space.hidden_nodes == (3,)


def test_derive_seed():
    a = derive_seed(42, 3, 1)
    assert a == derive_seed(42, 3, 1)
    assert 0 <= a < 2**63
    assert len({derive_seed(42, c, f) for c in range(20) for f in range(-1, 5)}) == 120


def test_mean_rmse_with_dominant_ridge_matches_hand_computation():
    # with gamma and eta at the top of the grid the regression RKM collapses
    # to its bias, which equals the mean of the fold's training targets, so
    # each fold's RMSE is the spread of the validation targets about that mean
    gen = np.random.default_rng(5)
    x = gen.normal(size=(23, 2))
    y = gen.normal(size=23) * 3 + 1
    d = Dataset(x, y, task="regression")
    params = {"gamma": 1e5, "eta": 1e5, "sigma": 1.0}
    res = cross_validate("rkm", d, params, k=5, seed=9)
    expected = []
    for tr, val in kfold(23, 5, 9):
        expected.append(-math.sqrt(np.mean((y[val] - y[tr].mean()) ** 2)))
    assert_allclose(res.fold_scores, expected, rtol=1e-8)
    assert res.mean == pytest.approx(np.mean(expected), rel=1e-8)


def test_constant_target_gives_zero_rmse():
    gen = np.random.default_rng(6)
    d = Dataset(gen.normal(size=(15, 2)), np.full(15, 4.0), task="regression")
    res = cross_validate("rkm", d, {"gamma": 1e5, "eta": 1e5, "sigma": 1.0}, k=5, seed=1)
    # the fold standard deviation of a constant target is zero
    assert max(abs(s) for s in res.fold_scores) <= 1e-8


def test_fold_order_does_not_matter():
    d = blob_dataset()
    plan = prepare_folds(d, 5, 3)
    params = {"eta": 1.0, "lam": 0.1, "sigma": 1.0}
    forward = evaluate_plan("r2km", plan, params)
    reverse = evaluate_plan("r2km", CvPlan(plan.folds[::-1], plan.codec, plan.seed), params)
    assert sorted(forward.fold_scores) == sorted(reverse.fold_scores)
    assert forward.mean == pytest.approx(reverse.mean, rel=1e-15)


def test_cross_validation_is_deterministic():
    d = blob_dataset()
    params = {"C": 1.0, "hidden_nodes": 23, "activation": Activation.SIGMOID}
    a = cross_validate("rvfl", d, params, k=5, seed=11, combo_index=4)
    b = cross_validate("rvfl", d, params, k=5, seed=11, combo_index=4)
    assert a == b


def test_validation_rows_never_touch_scaling():
    d = blob_dataset()
    plan = prepare_folds(d, 5, 0)
    for (tr_idx, val_idx), fold in zip(kfold(len(d), 5, 0), plan.folds):
        mean, std = d.x[tr_idx].mean(axis=0), d.x[tr_idx].std(axis=0)
        assert_allclose(fold.x_val, (d.x[val_idx] - mean) / std, rtol=1e-12)


def test_failed_fold_scores_minus_infinity(monkeypatch):
    real = ms.fit_model

    def flaky(kind, x, y, params, codec, seed):
        if params["lam"] == 0.5:
            raise SingularSystemError("forced")
        return real(kind, x, y, params, codec, seed)

    monkeypatch.setattr(ms, "fit_model", flaky)
    space = SearchSpace(eta=(1.0,), lam=(0.5, 0.1), sigma=(1.0,))
    res = tune("r2km", blob_dataset(), space, k=3, seed=0)
    assert res.results[0].mean == -math.inf
    assert res.best_params["lam"] == 0.1


def test_single_combination_grid():
    space = SearchSpace(eta=(2.0,), lam=(0.3,), sigma=(4.0,))
    res = tune("r2km", blob_dataset(), space, k=3, seed=0)
    assert res.best_params == {"eta": 2.0, "lam": 0.3, "sigma": 4.0}
    assert res.best_index == 0


def injected(scores):
    return lambda params, i: CvResult(scores[i], (scores[i],))


def test_injected_unique_max():
    space = SearchSpace(eta=(1.0, 2.0), lam=(1.0, 2.0), sigma=(1.0,))
    res = tune("r2km", None, space, scorer=injected([0.1, 0.4, 0.9, 0.3]))
    assert res.best_index == 2
    assert res.best_params == {"eta": 2.0, "lam": 1.0, "sigma": 1.0}


def test_injected_tie_prefers_earlier():
    space = SearchSpace(eta=(1.0, 2.0), lam=(1.0, 2.0), sigma=(1.0,))
    res = tune("r2km", None, space, scorer=injected([0.1, 0.9, 0.9, 0.3]))
    assert res.best_index == 1


def test_evaluation_order_invariance():
    space = SearchSpace(eta=(1.0, 2.0), lam=(1.0, 2.0), sigma=(1.0, 2.0))
    scores = [0.2, 0.7, 0.1, 0.7, 0.5, 0.0, 0.7, 0.3]
    base = tune("r2km", None, space, scorer=injected(scores))
    for order in ([7, 6, 5, 4, 3, 2, 1, 0], [3, 1, 6, 0, 2, 7, 5, 4]):
        res = tune("r2km", None, space, scorer=injected(scores), order=order)
        assert res.best_index == base.best_index == 1
    with pytest.raises(ParameterError):
        tune("r2km", None, space, scorer=injected(scores), order=[0, 1])


def test_all_failed_raises():
    space = SearchSpace(eta=(1.0,), lam=(1.0,), sigma=(1.0,))
    with pytest.raises(TuningError):
        tune("r2km", None, space, scorer=injected([-math.inf]))


def test_parallel_matches_serial():
    d = blob_dataset(n=20)
    space = SearchSpace(C=(0.1, 10.0), hidden_nodes=(3, 23), activation=(1, 3))
    serial = tune("rvfl", d, space, k=4, seed=2, jobs=1)
    parallel = tune("rvfl", d, space, k=4, seed=2, jobs=2)
    assert serial.results == parallel.results
    assert serial.best_index == parallel.best_index


def test_tuning_csv(tmp_path):
    space = SearchSpace(C=(1.0,), hidden_nodes=(3, 23), activation=(Activation.SINE,))
    res = tune("rvflwodl", blob_dataset(), space, k=3, seed=0)
    path = tmp_path / "t.csv"
    write_tuning_csv(path, res)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["C", "hidden_nodes", "activation", "mean_score", "fold_0", "fold_1", "fold_2"]
    assert rows[1][:3] == ["1.0", "3", "SINE"]
    assert float(rows[2][3]) == res.results[1].mean
