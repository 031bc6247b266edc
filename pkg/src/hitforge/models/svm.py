"""Soft-margin RBF support vector machine solved in the dual by SMO."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import HitforgeError, _kernels
from .config import SvmConfig

SUPPORT_EPS = 1e-8


class SvmConvergenceError(HitforgeError):
    def __init__(self, passes: int, violation: float):
        super().__init__(f"SMO did not converge after {passes} passes "
                         f"(max KKT violation {violation:.3g})")
        self.passes = passes
        self.violation = violation


def rbf_kernel(x, x2, gamma: float) -> float:
    """exp(-gamma * ||x - x2||^2)."""
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != x2.shape:
        raise ValueError("kernel arguments differ in dimension")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    diff = x - x2
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def dual_objective(alpha, y, K) -> float:
    """sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij  (y in {-1, +1})."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def kkt_violation(alpha, y, K, b: float, C: float) -> float:
    """Largest KKT violation of the dual solution, measured on y*f(x) - 1."""
    alpha = np.asarray(alpha)
    r = np.asarray(y) * (K @ (alpha * y) + b) - 1.0
    below = np.where(alpha < C, np.maximum(0.0, -r), 0.0)
    above = np.where(alpha > 0.0, np.maximum(0.0, r), 0.0)
    return float(np.max(np.maximum(below, above), initial=0.0))


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    labels: np.ndarray  # +-1
    b: float
    config: SvmConfig

    kind = "svm"

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def gamma(self) -> float:
        return self.config.gamma

    def score(self, X) -> np.ndarray:
        """Decision value f(x) = sum_i alpha_i y_i K(x_i, x) + b."""
        K = rbf_matrix(np.atleast_2d(X), self.support_vectors, self.config.gamma)
        return K @ (self.alphas * self.labels) + self.b

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > 0.0).astype(np.int64)

    def params(self) -> dict:
        return {"support_vectors": self.support_vectors.tolist(),
                "alphas": self.alphas.tolist(), "labels": self.labels.tolist(),
                "b": float(self.b)}

    @classmethod
    def from_params(cls, params: dict, config: SvmConfig) -> "SvmModel":
        return cls(np.array(params["support_vectors"], dtype=np.float64),
                   np.array(params["alphas"], dtype=np.float64),
                   np.array(params["labels"], dtype=np.float64), float(params["b"]), config)


@dataclass
class SmoResult:
    alpha: np.ndarray
    b: float
    passes: int
    violation: float


def solve_dual(K, y_pm, config: SvmConfig) -> SmoResult:
    alpha, b, passes, converged = _kernels.smo_solve(
        K, y_pm, float(config.C), float(config.tol), int(config.max_passes), int(config.seed))
    violation = kkt_violation(alpha, y_pm, K, b, config.C)
    if not converged:
        raise SvmConvergenceError(passes, violation)
    return SmoResult(alpha, float(b), passes, violation)


def train_svm(X, y, config: SvmConfig = None) -> SvmModel:
    """Fit on 0/1 labels (mapped to -1/+1); keeps multipliers above 1e-8."""
    config = config or SvmConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("the SVM needs both classes present")
    y_pm = np.where(y == 1, 1.0, -1.0)
    res = solve_dual(rbf_matrix(X, X, config.gamma), y_pm, config)
    sv = res.alpha > SUPPORT_EPS
    return SvmModel(X[sv].copy(), res.alpha[sv].copy(), y_pm[sv].copy(), res.b, config)
