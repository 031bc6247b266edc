import json

import numpy as np
import pytest

from hitforge.eval import MetricsReport
from hitforge.features import DEFAULT_SCHEMA, FeatureMatrix, ScalerStats
from hitforge.models import default_config, train
from hitforge.search import (ParamSpace, Range, SearchData, SearchError, best_trial,
                             derive_seed, grid_search, load_sweep, random_search, rank,
                             run_sweep, write_trials_csv)


def _data(seed=0, n=160):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.standard_normal((n, 15))
    X[:, 0] += np.where(y == 1, 1.0, -1.0)
    scaler = ScalerStats(DEFAULT_SCHEMA.names, (0.0,) * 15, (1.0,) * 15, (False,) * 15)
    tr = FeatureMatrix(X[:120], y[:120], DEFAULT_SCHEMA, scaler)
    va = FeatureMatrix(X[120:], y[120:], DEFAULT_SCHEMA, scaler)
    return SearchData(tr, va)


DATA = _data()


def test_ranges_and_spaces():
    with pytest.raises(SearchError):
        Range(2, 1)
    with pytest.raises(SearchError):
        Range(0, 1, law="log-uniform")
    with pytest.raises(SearchError):
        ParamSpace({})
    with pytest.raises(SearchError):
        ParamSpace({"a": []})
    space = ParamSpace({"a": [1, 2, 3], "b": ["x", "y"]})
    assert space.is_finite and len(space.grid()) == 6
    with pytest.raises(SearchError):
        ParamSpace({"a": {"low": 1, "high": 2}}).grid()
    rng = np.random.default_rng(0)
    r = Range(1e-4, 1e-1, "log-uniform")
    draws = [r.sample(rng) for _ in range(200)]
    assert all(1e-4 <= v <= 1e-1 for v in draws)
    ints = [Range(2, 5, integer=True).sample(rng) for _ in range(200)]
    assert set(ints) == {2, 3, 4, 5}


def test_derived_seeds_are_pure():
    assert derive_seed(7, 3) == derive_seed(7, 3)
    assert len({derive_seed(7, i) for i in range(100)}) == 100


def test_single_trial_wins():
    (t,) = random_search(ParamSpace({"n_estimators": [3]}), 1, 0, DATA, "rf")
    assert t.report is not None and t.index == 0


def test_random_search_determinism_and_serial_equivalence():
    space = ParamSpace({"max_features": {"low": 1, "high": 15, "integer": True},
                        "n_estimators": [3, 5]})
    a = random_search(space, 6, 42, DATA, "rf")
    b = random_search(space, 6, 42, DATA, "rf", workers=2)
    assert [t.key() for t in a] == [t.key() for t in b]
    accs = [t.accuracy for t in a]
    assert accs == sorted(accs, reverse=True)


def test_grid_counts_and_default_rf_point():
    space = ParamSpace({"n_estimators": [40, 80, 120], "max_features": [4, 8],
                        "min_samples_split": [2]})
    grid = space.grid()
    assert len(grid) == 6
    assert sum(1 for p in grid
               if p == {"n_estimators": 80, "max_features": 8, "min_samples_split": 2}) == 1


def test_one_point_grid_equals_direct_training():
    (t,) = grid_search(ParamSpace({"epochs": [30]}), 5, DATA, "lr")
    cfg = default_config("lr", epochs=30, seed=derive_seed(5, 0))
    model = train("lr", DATA.train, cfg)
    direct = MetricsReport.evaluate("lr", "val", model.predict(DATA.val.rows), DATA.val.labels)
    assert t.report == direct


def test_failed_trial_is_recorded_not_fatal():
    trials = grid_search(ParamSpace({"max_passes": [1, 10000], "gamma": [0.5]}), 0, DATA,
                         "svm")
    assert len(trials) == 2
    failed = [t for t in trials if t.error]
    assert len(failed) == 1 and "converge" in failed[0].error
    assert trials[-1] is failed[0]


def test_seed_isolation():
    space = ParamSpace({"n_estimators": [3], "max_features": [2, 4, 6]})
    a = grid_search(space, 1, DATA, "rf")
    by_index = {t.index: t for t in a}
    assert all(by_index[i].seed == derive_seed(1, i) for i in range(3))


def test_rank_ties_by_index():
    from hitforge.search import Trial
    r = MetricsReport("x", "val", 0.5, 0.5, 0.5)
    trials = [Trial(2, {}, 0, r), Trial(0, {}, 0, r), Trial(1, {}, 0, None, error="boom"),
              Trial(3, {}, 0, MetricsReport("x", "val", 0.9, 0.9, 0.9))]
    assert [t.index for t in rank(trials)] == [3, 0, 2, 1]


def test_sweep_file_and_outputs(tmp_path):
    sweep = {"model": "lr", "master_seed": 3,
             "random": {"n_trials": 2, "space": {"epochs": {"low": 10, "high": 40,
                                                            "integer": True}}},
             "grid": {"space": {"epochs": [20, 30]}}}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(sweep))
    stages = run_sweep(load_sweep(path), DATA)
    assert list(stages) == ["random", "grid"] and len(stages["grid"]) == 2
    write_trials_csv(tmp_path / "t.csv", stages)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 5 and lines[0].startswith("stage,rank,index,seed,accuracy")
    assert best_trial(stages).report is not None
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": "knn", "grid": {}}))
    with pytest.raises(SearchError):
        load_sweep(bad)
