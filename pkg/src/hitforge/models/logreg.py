"""Binary logistic regression fitted by maximum likelihood with RMSprop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import LogRegConfig
from .optim import RmspropState


def sigmoid(x):
    """e^x / (1 + e^x), evaluated without overflow for any finite x."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out.item() if out.ndim == 0 else out


def _logits(beta, X):
    return beta[0] + X @ beta[1:]


def nll(beta, X, y) -> float:
    """Negative log-likelihood of labels ``y`` under coefficients ``beta``.

    ``beta`` holds the intercept first, then one coefficient per column of X.
    Uses ``log(1 + e^z) - y z`` per sample, which never takes log(0).
    """
    z = _logits(np.asarray(beta, dtype=np.float64), np.asarray(X, dtype=np.float64))
    return float(np.sum(np.logaddexp(0.0, z) - np.asarray(y) * z))


def nll_grad(beta, X, y) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    r = sigmoid(_logits(np.asarray(beta, dtype=np.float64), X)) - np.asarray(y)
    r = np.atleast_1d(r)
    return np.concatenate([[r.sum()], X.T @ r])


@dataclass
class LogRegModel:
    beta: np.ndarray
    config: LogRegConfig

    kind = "lr"

    @property
    def n_features(self) -> int:
        return self.beta.shape[0] - 1

    def score(self, X) -> np.ndarray:
        return np.atleast_1d(sigmoid(_logits(self.beta, np.asarray(X, dtype=np.float64))))

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > self.config.threshold).astype(np.int64)

    def params(self) -> dict:
        return {"beta": self.beta.tolist()}

    @classmethod
    def from_params(cls, params: dict, config: LogRegConfig) -> "LogRegModel":
        return cls(np.array(params["beta"], dtype=np.float64), config)


def train_logreg(X, y, config: LogRegConfig = None) -> LogRegModel:
    """Full-batch RMSprop on the mean negative log-likelihood, from beta = 0."""
    config = config or LogRegConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("logistic regression needs both classes present")
    n = X.shape[0]
    beta = np.zeros(X.shape[1] + 1)
    state = RmspropState.zeros_like(beta, rho=config.rho, lr=config.lr, eps=config.eps)
    for _ in range(config.epochs):
        state.apply(beta, nll_grad(beta, X, y) / n)
    return LogRegModel(beta, config)
