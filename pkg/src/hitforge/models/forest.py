"""Random forest of unpruned Gini trees on bootstrap resamples."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from .config import ForestConfig


def gini(labels) -> float:
    """1 - p0^2 - p1^2 for a non-empty 0/1 label sequence."""
    labels = np.asarray(labels)
    n = labels.size
    if n == 0:
        raise ValueError("gini of an empty node")
    p1 = np.count_nonzero(labels) / n
    p0 = 1.0 - p1
    return 1.0 - p0 * p0 - p1 * p1


def best_split(X, y, feature_subset, rows=None):
    """Best Gini split over ``feature_subset``.

    Candidate thresholds are midpoints between consecutive distinct values;
    rows with ``x[f] <= threshold`` go left. Returns ``(feature, threshold,
    impurity_decrease)``, or ``None`` if no split lowers impurity. Ties go
    to the lowest feature index, then the lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if rows is None:
        rows = np.arange(X.shape[0], dtype=np.intp)
    return _kernels.best_split(X, y, rows, feature_subset)


@dataclass
class Tree:
    """Flat preorder node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, 2): class-0 and class-1 training rows

    def __len__(self):
        return self.feature.shape[0]

    def leaf_of(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                return node
            a = rows[active]
            na = node[active]
            go_left = X[a, f[active]] <= self.threshold[na]
            node[active] = np.where(go_left, self.left[na], self.right[na])

    def vote(self, X) -> np.ndarray:
        c = self.counts[self.leaf_of(X)]
        # even leaf counts vote non-hit
        return (c[:, 1] > c[:, 0]).astype(np.int64)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.intp),
                   np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.intp), np.array(d["right"], dtype=np.intp),
                   np.array(d["counts"], dtype=np.int64).reshape(-1, 2))


def grow_tree(X, y, rows, max_features: int, min_samples_split: int,
              rng: np.random.Generator) -> Tree:
    """Grow one unpruned tree on ``X[rows]`` (rows may repeat)."""
    d = X.shape[1]
    k = min(max_features, d)
    feature, threshold, left, right, counts = [], [], [], [], []
    stack = [(np.asarray(rows, dtype=np.intp), -1, False)]
    while stack:
        node_rows, parent, is_right = stack.pop()
        idx = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = idx
        n1 = int(y[node_rows].sum())
        n0 = node_rows.shape[0] - n1
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((n0, n1))
        if node_rows.shape[0] < min_samples_split or n0 == 0 or n1 == 0:
            continue
        feats = np.arange(d) if k == d else rng.choice(d, size=k, replace=False)
        split = _kernels.best_split(X, y, node_rows, feats)
        if split is None:
            continue
        f, thr, _ = split
        feature[idx] = f
        threshold[idx] = thr
        go_left = X[node_rows, f] <= thr
        stack.append((node_rows[~go_left], idx, True))
        stack.append((node_rows[go_left], idx, False))
    return Tree(np.array(feature, dtype=np.intp), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.intp), np.array(right, dtype=np.intp),
                np.array(counts, dtype=np.int64).reshape(-1, 2))


def _fit_one(args):
    X, y, seed_seq, config = args
    rng = np.random.default_rng(seed_seq)
    n = X.shape[0]
    rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
    return grow_tree(X, y, rows, config.max_features, config.min_samples_split, rng)


@dataclass
class ForestModel:
    trees: list
    n_features: int
    config: ForestConfig

    kind = "rf"

    def votes(self, X) -> np.ndarray:
        return np.stack([t.vote(X) for t in self.trees])

    def score(self, X) -> np.ndarray:
        """Fraction of trees voting hit."""
        return self.votes(np.atleast_2d(X)).mean(axis=0)

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > self.config.threshold).astype(np.int64)

    def params(self) -> dict:
        return {"n_features": self.n_features, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_params(cls, params: dict, config: ForestConfig) -> "ForestModel":
        return cls([Tree.from_dict(t) for t in params["trees"]], params["n_features"], config)


def train_forest(X, y, config: ForestConfig = None, workers: int = 1) -> ForestModel:
    """Fit ``n_estimators`` trees, each from its own child seed of ``config.seed``.

    The result does not depend on ``workers``.
    """
    config = config or ForestConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("the forest needs both classes present")
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_estimators)
    jobs = [(X, y, s, config) for s in seeds]
    if workers > 1 and config.n_estimators > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(_fit_one, jobs, chunksize=max(1, len(jobs) // workers)))
    else:
        trees = [_fit_one(j) for j in jobs]
    return ForestModel(trees, X.shape[1], config)


def predict_forest(model: ForestModel, x):
    """``(probability, label)`` for a single row; exact 0.5 votes map to label 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected {model.n_features} features, got shape {x.shape}")
    p = float(model.score(x[None, :])[0])
    return p, int(p > model.config.threshold)
