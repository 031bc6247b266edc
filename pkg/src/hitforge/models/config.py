"""Hyperparameters for the four classifiers (defaults are the published settings)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields


class _Config:
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
        return cls(**d)

    def _check_common(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass
class LogRegConfig(_Config):
    epochs: int = 1000
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        self._check_common()


@dataclass
class MlpConfig(_Config):
    hidden: int = 10
    batch_size: int = 32
    epochs: int = 1000
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if min(self.hidden, self.batch_size, self.epochs) < 1:
            raise ValueError("hidden, batch_size and epochs must be positive")
        self._check_common()


@dataclass
class ForestConfig(_Config):
    n_estimators: int = 80
    max_features: int = 8
    min_samples_split: int = 2
    criterion: str = "gini"
    bootstrap: bool = True
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if min(self.n_estimators, self.max_features) < 1 or self.min_samples_split < 2:
            raise ValueError("n_estimators, max_features >= 1 and min_samples_split >= 2")
        if self.criterion != "gini":
            raise ValueError("only the gini criterion is supported")
        self._check_common()


@dataclass
class SvmConfig(_Config):
    gamma: float = 0.1
    C: float = 10.0
    tol: float = 1e-3
    max_passes: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not (self.gamma > 0 and self.C > 0 and self.tol > 0):
            raise ValueError("gamma, C and tol must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be positive")


CONFIGS = {"lr": LogRegConfig, "nn": MlpConfig, "rf": ForestConfig, "svm": SvmConfig}
