"""Randomized search, then grid search, over model hyperparameters.

Trials are independent: each gets a seed derived only from the master seed
and its index, trains on the same immutable split, and is scored on the
validation set. Rankings (validation accuracy, descending; ties by trial
index) do not depend on the number of workers.

Sweep file (JSON)::

    {"model": "rf", "master_seed": 0,
     "random": {"n_trials": 20, "space": {"max_features": {"low": 2, "high": 15,
                                                            "integer": true}}},
     "grid": {"space": {"n_estimators": [40, 80], "max_features": [4, 8]}}}

A domain is either a list (grid) or ``{"low", "high", "law", "integer"}``
with ``law`` one of ``uniform`` / ``log-uniform``.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import HitforgeError
from .corpus import CorpusSplit
from .eval import MetricsReport, fmt_metric
from .features import DEFAULT_SCHEMA, FeatureMatrix, FeatureSchema, build_matrix, fit_scaler
from .models import default_config, train
from .models.config import CONFIGS


class SearchError(HitforgeError):
    pass


@dataclass(frozen=True)
class Range:
    low: float
    high: float
    law: str = "uniform"
    integer: bool = False

    def __post_init__(self):
        if not self.low <= self.high:
            raise SearchError(f"range bounds out of order: {self.low} > {self.high}")
        if self.law not in ("uniform", "log-uniform"):
            raise SearchError(f"unknown sampling law {self.law!r}")
        if self.law == "log-uniform" and self.low <= 0:
            raise SearchError("log-uniform ranges need positive bounds")

    def sample(self, rng: np.random.Generator):
        if self.integer:
            if self.law == "uniform":
                return int(rng.integers(int(self.low), int(self.high) + 1))
            v = math.exp(rng.uniform(math.log(self.low), math.log(self.high + 1)))
            return min(int(self.high), int(v))
        if self.law == "uniform":
            return float(rng.uniform(self.low, self.high))
        return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))


class ParamSpace:
    def __init__(self, domains: dict):
        if not domains:
            raise SearchError("empty parameter space")
        self.domains = {}
        for name, dom in domains.items():
            if isinstance(dom, Range):
                self.domains[name] = dom
            elif isinstance(dom, dict):
                self.domains[name] = Range(**dom)
            else:
                values = list(dom)
                if not values:
                    raise SearchError(f"empty domain for {name!r}")
                self.domains[name] = values

    @property
    def is_finite(self) -> bool:
        return all(isinstance(d, list) for d in self.domains.values())

    def grid(self) -> list[dict]:
        if not self.is_finite:
            raise SearchError("grid search needs finite domains for every parameter")
        names = list(self.domains)
        return [dict(zip(names, combo))
                for combo in itertools.product(*(self.domains[n] for n in names))]

    def sample(self, rng: np.random.Generator) -> dict:
        out = {}
        for name, dom in self.domains.items():
            if isinstance(dom, Range):
                out[name] = dom.sample(rng)
            else:
                v = dom[int(rng.integers(len(dom)))]
                out[name] = v.item() if isinstance(v, np.generic) else v
        return out


def derive_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


@dataclass
class Trial:
    index: int
    params: dict
    seed: int
    report: Optional[MetricsReport] = None
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def accuracy(self) -> float:
        return self.report.accuracy if self.report is not None else float("nan")

    def config(self, kind: str):
        return default_config(kind, **{"seed": self.seed, **self.params})

    def key(self):
        """Everything except wall time; equal keys mean equal trials."""
        rep = self.report.to_dict() if self.report is not None else None
        return (self.index, json.dumps(self.params, sort_keys=True), self.seed, repr(rep),
                self.error)


@dataclass(frozen=True)
class SearchData:
    train: FeatureMatrix
    val: FeatureMatrix


def prepare(data: Union[CorpusSplit, SearchData], schema: FeatureSchema = DEFAULT_SCHEMA):
    if isinstance(data, SearchData):
        return data
    scaler = fit_scaler(data.train, schema)
    return SearchData(build_matrix(data.train, schema, scaler),
                      build_matrix(data.validation, schema, scaler))


def run_trial(args) -> Trial:
    kind, index, params, seed, data = args
    trial = Trial(index, params, seed)
    t0 = time.perf_counter()
    try:
        model = train(kind, data.train, trial.config(kind))
        trial.report = MetricsReport.evaluate(kind, "val", model.predict(data.val.rows),
                                              data.val.labels)
    except Exception as exc:  # a failed trial is recorded, never fatal to the sweep
        trial.error = f"{type(exc).__name__}: {exc}"
    trial.wall_time = time.perf_counter() - t0
    return trial


def rank(trials: list[Trial]) -> list[Trial]:
    return sorted(trials, key=lambda t: (t.report is None, -t.accuracy if t.report else 0.0,
                                         t.index))


def _execute(kind, param_list, master_seed, data, workers) -> list[Trial]:
    if kind not in CONFIGS:
        raise SearchError(f"unknown model kind {kind!r}")
    tasks = [(kind, i, p, derive_seed(master_seed, i), data) for i, p in enumerate(param_list)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(run_trial, tasks))
    else:
        trials = [run_trial(t) for t in tasks]
    return rank(trials)


def random_search(space: ParamSpace, n_trials: int, master_seed: int, data, kind: str,
                  workers: int = 1, schema: FeatureSchema = DEFAULT_SCHEMA) -> list[Trial]:
    """Sample ``n_trials`` configs; returns trials ranked by validation accuracy."""
    if n_trials < 1:
        raise SearchError("n_trials must be at least 1")
    params = [space.sample(np.random.default_rng([master_seed, i, 1]))
              for i in range(n_trials)]
    return _execute(kind, params, master_seed, prepare(data, schema), workers)


def grid_search(space: ParamSpace, master_seed: int, data, kind: str, workers: int = 1,
                schema: FeatureSchema = DEFAULT_SCHEMA) -> list[Trial]:
    """Evaluate every point of the Cartesian product once, ranked."""
    return _execute(kind, space.grid(), master_seed, prepare(data, schema), workers)


def load_sweep(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        sweep = json.load(fh)
    if sweep.get("model") not in CONFIGS:
        raise SearchError(f"sweep names unknown model {sweep.get('model')!r}")
    if "random" not in sweep and "grid" not in sweep:
        raise SearchError("sweep needs a 'random' and/or 'grid' stage")
    return sweep


def run_sweep(sweep: dict, data, workers: int = 1, master_seed: Optional[int] = None,
              schema: FeatureSchema = DEFAULT_SCHEMA) -> dict[str, list[Trial]]:
    """Randomized stage then grid stage, as configured in ``sweep``."""
    kind = sweep["model"]
    seed = sweep.get("master_seed", 0) if master_seed is None else master_seed
    data = prepare(data, schema)
    out = {}
    if "random" in sweep:
        stage = sweep["random"]
        out["random"] = random_search(ParamSpace(stage["space"]), int(stage["n_trials"]),
                                      seed, data, kind, workers)
    if "grid" in sweep:
        out["grid"] = grid_search(ParamSpace(sweep["grid"]["space"]), seed, data, kind,
                                  workers)
    return out


def write_trials_csv(path, stages: dict[str, list[Trial]]) -> None:
    """One row per trial, stage by stage, in rank order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "rank", "index", "seed", "accuracy", "precision", "recall",
                    "error", "wall_time", "params"])
        for stage, trials in stages.items():
            for r, t in enumerate(trials, 1):
                rep = t.report
                w.writerow([stage, r, t.index, t.seed,
                            fmt_metric(rep.accuracy) if rep else "NA",
                            fmt_metric(rep.precision) if rep else "NA",
                            fmt_metric(rep.recall) if rep else "NA",
                            t.error or "", f"{t.wall_time:.3f}",
                            json.dumps(t.params, sort_keys=True)])


def best_trial(stages: dict[str, list[Trial]]) -> Trial:
    """Top-ranked successful trial across stages (later stages win ties)."""
    best = None
    for trials in stages.values():
        for t in trials:
            if t.report is not None and (best is None or t.accuracy >= best.accuracy):
                best = t
                break
    if best is None:
        raise SearchError("every trial failed")
    return best
