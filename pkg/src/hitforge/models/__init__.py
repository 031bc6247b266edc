"""The four classifiers behind one train/predict/persist surface.

Model kinds: ``lr`` (logistic regression), ``nn`` (one-hidden-layer MLP),
``rf`` (random forest) and ``svm`` (RBF SVM). Scores are probabilities for
``lr``/``nn``, the fraction of hit votes for ``rf`` and the signed decision
value for ``svm``. Labels are 1 iff the score exceeds 0.5 (0 for ``svm``).
"""
from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .. import HitforgeError
from ..features import FeatureMatrix, FeatureSchema, ScalerStats
from .config import CONFIGS, ForestConfig, LogRegConfig, MlpConfig, SvmConfig
from .forest import ForestModel, train_forest
from .logreg import LogRegModel, train_logreg
from .mlp import MlpModel, train_mlp
from .svm import SvmModel, train_svm

MODEL_CLASSES = {"lr": LogRegModel, "nn": MlpModel, "rf": ForestModel, "svm": SvmModel}
KINDS = tuple(MODEL_CLASSES)
FORMAT_VERSION = 1


class ModelError(HitforgeError):
    pass


def default_config(kind: str, **overrides):
    if kind not in CONFIGS:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    return CONFIGS[kind](**overrides)


def train(kind: str, data: FeatureMatrix, config=None, workers: int = 1):
    """Fit a model of ``kind`` on a feature matrix."""
    config = config if config is not None else default_config(kind)
    X, y = data.rows, data.labels
    if kind == "lr":
        return train_logreg(X, y, config)
    if kind == "nn":
        return train_mlp(X, y, config)
    if kind == "rf":
        return train_forest(X, y, config, workers=workers)
    if kind == "svm":
        return train_svm(X, y, config)
    raise ModelError(f"unknown model kind {kind!r}")


def predict(model, X):
    """``(scores, labels)`` for a row or a matrix of rows."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[1] != model.n_features:
        raise ModelError(f"model expects {model.n_features} features, got {X2.shape[1]}")
    scores = np.asarray(model.score(X2), dtype=np.float64)
    labels = model.predict(X2)
    if single:
        return float(scores[0]), int(labels[0])
    return scores, labels


def model_to_dict(model, schema: Optional[FeatureSchema] = None,
                  scaler: Optional[ScalerStats] = None) -> dict:
    return {
        "format": FORMAT_VERSION,
        "kind": model.kind,
        "config": model.config.to_dict(),
        "schema": list(schema.names) if schema is not None else None,
        "scaler": scaler.to_dict() if scaler is not None else None,
        "params": model.params(),
    }


def model_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind not in MODEL_CLASSES:
        raise ModelError(f"unknown model kind {kind!r}")
    config = CONFIGS[kind].from_dict(doc["config"])
    return MODEL_CLASSES[kind].from_params(doc["params"], config)


def dumps(model, schema=None, scaler=None) -> str:
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(model_to_dict(model, schema, scaler), sort_keys=True)


def save_model(path, model, schema=None, scaler=None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model, schema, scaler))
        fh.write("\n")


def load_model(path):
    """Returns ``(model, schema, scaler)``; schema/scaler may be ``None``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    schema = FeatureSchema(tuple(doc["schema"])) if doc.get("schema") else None
    scaler = ScalerStats.from_dict(doc["scaler"]) if doc.get("scaler") else None
    return model_from_dict(doc), schema, scaler


__all__ = [
    "KINDS", "ForestConfig", "LogRegConfig", "MlpConfig", "SvmConfig", "ModelError",
    "default_config", "train", "predict", "save_model", "load_model", "model_to_dict",
    "model_from_dict", "dumps",
]
