"""One-hidden-layer ReLU network with a sigmoid output, trained with RMSprop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MlpConfig
from .logreg import sigmoid
from .optim import RmspropState


class MlpParams:
    """Views into one flat parameter vector: W1 (h x d), b1 (h), w2 (h), b2 (1)."""

    def __init__(self, flat: np.ndarray, d: int, hidden: int):
        self.flat = flat
        self.d = d
        self.hidden = hidden
        h = hidden
        self.W1 = flat[:h * d].reshape(h, d)
        self.b1 = flat[h * d:h * d + h]
        self.w2 = flat[h * d + h:h * d + 2 * h]
        self.b2 = flat[h * d + 2 * h:h * d + 2 * h + 1]

    @staticmethod
    def size(d: int, hidden: int) -> int:
        return hidden * d + 2 * hidden + 1


def forward(p: MlpParams, X):
    pre = X @ p.W1.T + p.b1
    H = np.maximum(pre, 0.0)
    z = H @ p.w2 + p.b2[0]
    return pre, H, z


def loss_and_grad(flat, X, y, d: int, hidden: int):
    """Mean binary cross-entropy and its gradient w.r.t. the flat parameters."""
    p = MlpParams(flat, d, hidden)
    pre, H, z = forward(p, X)
    m = X.shape[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (np.atleast_1d(sigmoid(z)) - y) / m
    g = np.empty_like(flat)
    gp = MlpParams(g, d, hidden)
    gp.w2[:] = H.T @ dz
    gp.b2[0] = dz.sum()
    dpre = np.outer(dz, p.w2) * (pre > 0)
    gp.W1[:] = dpre.T @ X
    gp.b1[:] = dpre.sum(axis=0)
    return loss, g


@dataclass
class MlpModel:
    flat: np.ndarray
    n_features: int
    config: MlpConfig

    kind = "nn"

    @property
    def layers(self) -> MlpParams:
        return MlpParams(self.flat, self.n_features, self.config.hidden)

    def score(self, X) -> np.ndarray:
        _, _, z = forward(self.layers, np.asarray(X, dtype=np.float64))
        return np.atleast_1d(sigmoid(z))

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > self.config.threshold).astype(np.int64)

    def params(self) -> dict:
        p = self.layers
        return {"W1": p.W1.tolist(), "b1": p.b1.tolist(), "w2": p.w2.tolist(),
                "b2": float(p.b2[0])}

    @classmethod
    def from_params(cls, params: dict, config: MlpConfig) -> "MlpModel":
        W1 = np.array(params["W1"], dtype=np.float64)
        flat = np.concatenate([W1.ravel(), params["b1"], params["w2"], [params["b2"]]])
        return cls(flat.astype(np.float64), W1.shape[1], config)


def init_params(d: int, hidden: int, rng: np.random.Generator) -> np.ndarray:
    flat = np.zeros(MlpParams.size(d, hidden))
    p = MlpParams(flat, d, hidden)
    p.W1[:] = rng.standard_normal((hidden, d)) * np.sqrt(2.0 / d)
    p.w2[:] = rng.standard_normal(hidden) * np.sqrt(1.0 / hidden)
    return flat


def train_mlp(X, y, config: MlpConfig = None, history: list = None) -> MlpModel:
    """Mini-batch RMSprop on mean cross-entropy; batches reshuffled every epoch.

    If ``history`` is a list, the full-training-set loss after each epoch
    is appended to it.
    """
    config = config or MlpConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("the network needs both classes present")
    if n < config.batch_size:
        raise ValueError(f"{n} rows is fewer than one batch of {config.batch_size}")
    rng = np.random.default_rng(config.seed)
    flat = init_params(d, config.hidden, rng)
    state = RmspropState.zeros_like(flat, rho=config.rho, lr=config.lr, eps=config.eps)
    bs = config.batch_size
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            _, g = loss_and_grad(flat, X[idx], y[idx], d, config.hidden)
            state.apply(flat, g)
        if history is not None:
            history.append(loss_and_grad(flat, X, y, d, config.hidden)[0])
    return MlpModel(flat, d, config)
