"""Numbered acceptance checks. Each test carries a ``criterion`` mark; the
terminal summary prints one PASS/FAIL line per criterion."""
import csv
import json
import time
from datetime import date, timedelta

import mpmath
import numpy as np
import pytest

import oracles
from conftest import build_synthetic, run_cli
from hitforge.corpus import compute_score, raw_score, read_tracks_csv
from hitforge.eval import ConfusionMatrix, MetricsReport, metrics
from hitforge.models import train
from hitforge.models.config import ForestConfig, SvmConfig
from hitforge.models.forest import train_forest
from hitforge.models.logreg import nll_grad
from hitforge.models.mlp import MlpParams, loss_and_grad
from hitforge.models.optim import RmspropState, rmsprop_step
from hitforge.models.svm import dual_objective, kkt_violation, rbf_matrix, solve_dual, train_svm
from hitforge.search import ParamSpace, derive_seed, grid_search, prepare, rank

KINDS = ("lr", "nn", "rf", "svm")


class Clock:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f} s, limit {self.limit} s"


@pytest.mark.criterion(1, "LR validation metrics from its confusion counts")
def test_criterion_01_lr_metric_oracle():
    with Clock(1.0):
        m = metrics(ConfusionMatrix(tp=994, fp=339, fn=75, tn=731))
        assert abs(m.accuracy - 0.8065) <= 5e-5
        assert abs(m.precision - 0.7457) <= 5e-5
        assert abs(m.recall - 0.9298) <= 5e-5


@pytest.mark.criterion(2, "SVM precision/recall from its confusion counts")
def test_criterion_02_svm_metric_oracle():
    with Clock(1.0):
        m = metrics(ConfusionMatrix(tp=1065, fp=5, fn=447, tn=628))
        assert abs(m.precision - 0.9953) <= 5e-4
        assert abs(m.recall - 0.7044) <= 5e-4


@pytest.mark.criterion(3, "LR and MLP gradients against central differences")
def test_criterion_03_gradient_checks():
    worst = 0.0
    with Clock(10.0):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            n, d = int(rng.integers(3, 12)), int(rng.integers(1, 6))
            X = rng.standard_normal((n, d))
            y = rng.integers(0, 2, n)
            beta = rng.standard_normal(d + 1)
            num = oracles.central_difference(lambda b: oracles.logreg_nll_ld(b, X, y), beta)
            worst = max(worst, oracles.max_relative_error(nll_grad(beta, X, y), num))
        for seed in range(25):
            rng = np.random.default_rng(1000 + seed)
            d, h, n = int(rng.integers(1, 6)), int(rng.integers(1, 11)), int(rng.integers(4, 33))
            X = rng.standard_normal((n, d))
            y = rng.integers(0, 2, n).astype(float)
            flat = rng.standard_normal(MlpParams.size(d, h)) * 0.5
            _, g = loss_and_grad(flat, X, y, d, h)
            num = oracles.central_difference(lambda p: oracles.mlp_loss_ld(p, X, y, d, h), flat)
            worst = max(worst, oracles.max_relative_error(g, num))
    assert worst < 1e-4, worst


@pytest.mark.criterion(4, "RMSprop three-step trace")
def test_criterion_04_rmsprop_trace():
    with Clock(1.0):
        mpmath.mp.dps = 40
        lr, eps = mpmath.mpf("0.001"), mpmath.mpf("1e-8")
        grads = [2.0, 2.0, -1.0]
        # accumulator by hand with rho = 0.9: 0.1*4, 0.9*0.4 + 0.1*4, 0.9*0.76 + 0.1*1
        v_hand = [mpmath.mpf("0.4"), mpmath.mpf("0.76"), mpmath.mpf("0.784")]
        p_exact, p = mpmath.mpf(0), np.array([0.0])
        state = RmspropState.zeros_like(p)
        for g, v in zip(grads, v_hand):
            p_exact -= lr * g / mpmath.sqrt(v + eps)
            p, state = rmsprop_step(p, np.array([g]), state)
            assert abs(state.v[0] - float(v)) <= 1e-9
            assert abs(p[0] - float(p_exact)) <= 1e-9
        assert abs(float(-lr * 2 / mpmath.sqrt(v_hand[0] + eps)) + 0.00316228) < 1e-8


@pytest.mark.criterion(5, "single full-feature tree equals exhaustive CART")
def test_criterion_05_cart_oracle():
    with Clock(30.0):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n, d = int(rng.integers(2, 17)), int(rng.integers(1, 5))
            # one decimal keeps duplicate values and equal-gain ties in play
            X = np.round(rng.standard_normal((n, d)), 1)
            y = rng.integers(0, 2, n)
            y[0], y[1] = 0, 1
            cfg = ForestConfig(n_estimators=1, max_features=d, bootstrap=False, seed=seed)
            tree = train_forest(X, y, cfg).trees[0]
            assert oracles.tree_as_nested(tree) == oracles.cart_tree(X, y), seed


@pytest.mark.criterion(6, "SMO optimality, KKT and separable accuracy")
def test_criterion_06_svm_optimality():
    with Clock(60.0):
        cfg = SvmConfig()
        for seed in range(50):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((8, 2)) * 1.5
            y = np.where(rng.permutation(np.arange(8) % 2) == 1, 1.0, -1.0)
            K = rbf_matrix(X, X, cfg.gamma)
            res = solve_dual(K, y, cfg)
            best = dual_objective(res.alpha, y, K)
            for _ in range(1000):
                a = oracles.random_feasible_alpha(rng, y, cfg.C)
                assert dual_objective(a, y, K) <= best + 1e-9, seed
            assert kkt_violation(res.alpha, y, K, res.b, cfg.C) <= 1e-3, seed
        rng = np.random.default_rng(99)
        y = np.arange(80) % 2
        X = rng.standard_normal((80, 2)) * 0.4
        X[:, 0] += np.where(y == 1, 4.0, -4.0)
        model = train_svm(X, y, cfg)
        assert float(np.mean(model.predict(X) == y)) == 1.0


def _split_stats(split_dir):
    parts = {name: read_tracks_csv(split_dir / f"{name}.csv") for name in ("train", "val", "test")}
    return parts, {name: len(t) for name, t in parts.items()}


@pytest.mark.criterion(7, "synthetic corpus end to end with the four default models")
def test_criterion_07_synthetic_end_to_end(tmp_path):
    with Clock(300.0):
        paths = build_synthetic(tmp_path, seed=0)
        assert len(read_tracks_csv(paths["corpus"] / "corpus.csv")) == 2400
        parts, sizes = _split_stats(paths["split"])
        assert sizes == {"train": 2000, "val": 200, "test": 200}
        ids = [{t.track_id for t in tracks} for tracks in parts.values()]
        assert sum(map(len, ids)) == 2400 and len(set().union(*ids)) == 2400
        for tracks in parts.values():
            assert abs(sum(t.billboard_hit for t in tracks) - len(tracks) / 2) <= 1
        accuracy = {}
        for kind in KINDS:
            model_dir, eval_dir = tmp_path / f"model_{kind}", tmp_path / f"eval_{kind}"
            assert run_cli("train", "--model", kind, "--data", paths["split"], "--seed", 0,
                           "--out", model_dir) == 0
            assert run_cli("evaluate", "--model", model_dir / "model.json", "--data",
                           paths["split"], "--split", "val", "--out", eval_dir) == 0
            accuracy[kind] = json.loads((eval_dir / "metrics.json").read_text())["accuracy"]
    print(f"validation accuracy: {accuracy}")
    assert all(a > 0.85 for a in accuracy.values()), accuracy


def _full_run(root, seed):
    """fixtures -> ingest -> corpus -> split -> four models -> evaluate -> report."""
    paths = build_synthetic(root, seed=seed)
    metric_files = []
    for kind in KINDS:
        assert run_cli("train", "--model", kind, "--data", paths["split"], "--seed", seed,
                       "--out", root / "models" / kind) == 0
        for split in ("val", "test"):
            out = root / "eval" / f"{kind}_{split}"
            assert run_cli("evaluate", "--model", root / "models" / kind / "model.json",
                           "--data", paths["split"], "--split", split, "--out", out) == 0
            metric_files.append(out / "metrics.json")
    assert run_cli("report", "--metrics", *metric_files, "--out", root / "report") == 0
    return root


def _artifacts(root):
    """Every produced file except run manifests, whose timestamps differ by design."""
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "manifest.json"}


@pytest.mark.criterion(8, "two seeded pipeline runs are byte-identical")
def test_criterion_08_determinism(tmp_path):
    with Clock(300.0):
        a = _artifacts(_full_run(tmp_path / "a", seed=11))
        b = _artifacts(_full_run(tmp_path / "b", seed=11))
    for required in ("corpus/corpus.csv", "split/train.csv", "models/rf/model.json",
                     "models/nn/model.json", "report/results.csv", "report/accuracy.svg"):
        assert required in a
    assert sorted(a) == sorted(b)
    differing = [name for name in a if a[name] != b[name]]
    assert differing == []
    rows = list(csv.DictReader(open(tmp_path / "a" / "report" / "results.csv")))
    assert [r["model"] for r in rows] == list(KINDS)


@pytest.fixture(scope="module")
def search_data(tmp_path_factory):
    paths = build_synthetic(tmp_path_factory.mktemp("search"), seed=5)
    from hitforge.corpus import CorpusSplit
    tracks = {n: read_tracks_csv(paths["split"] / f"{n}.csv") for n in ("train", "val")}
    return prepare(CorpusSplit(tracks["train"], tracks["val"], [], 5))


@pytest.mark.criterion(9, "12-point grid is worker-count invariant and matches serial reruns")
def test_criterion_09_search_equivalence(search_data):
    space = ParamSpace({"n_estimators": [5, 10, 20], "max_features": [1, 2, 4, 8]})
    assert len(space.grid()) == 12
    with Clock(180.0):
        runs = {w: grid_search(space, 21, search_data, "rf", workers=w) for w in (1, 2, 8)}
        keys = {w: [t.key() for t in trials] for w, trials in runs.items()}
        assert keys[1] == keys[2] == keys[8]
        serial = []
        for index, params in enumerate(space.grid()):
            trial = runs[1][[t.index for t in runs[1]].index(index)]
            assert trial.params == params and trial.seed == derive_seed(21, index)
            model = train("rf", search_data.train, trial.config("rf"))
            rep = MetricsReport.evaluate("rf", "val", model.predict(search_data.val.rows),
                                         search_data.val.labels)
            serial.append(type(trial)(index, params, trial.seed, rep))
    assert rank(serial)[0].key() == runs[1][0].key()
    assert [t.key() for t in rank(serial)] == keys[1]


def _history(rng, start=date(2000, 1, 1)):
    weeks = int(rng.integers(0, 60))
    first = int(rng.integers(0, 500))
    ranks = rng.integers(1, 101, weeks)
    return [(start + timedelta(weeks=first + k), int(r)) for k, r in enumerate(ranks)]


@pytest.mark.criterion(10, "chart score bounds, extremes and monotonicity")
def test_criterion_10_score_properties():
    with Clock(5.0):
        rng = np.random.default_rng(2024)
        histories = [_history(rng) for _ in range(10_000)]
        raws = [raw_score(r for _, r in h) for h in histories]
        top = max(raws)
        scores = [compute_score(h, top) for h in histories]
        assert all(0.0 <= s <= 1.0 for s in scores)
        assert scores[int(np.argmax(raws))] == 1.0
        assert all(s == 0.0 for s, h in zip(scores, histories) if not h)
        assert compute_score([], top) == 0.0
        for h, s in zip(histories[:2000], scores):
            extra = h + [(date(2019, 1, 5), int(rng.integers(1, 101)))]
            assert compute_score(extra, top) >= s
            if h:
                k = int(rng.integers(0, len(h)))
                d, r = h[k]
                better = h[:k] + [(d, max(1, r - int(rng.integers(1, 20))))] + h[k + 1:]
                assert compute_score(better, top) >= s
                if r > 1:
                    assert raw_score(x for _, x in better) > raw_score(x for _, x in h)
