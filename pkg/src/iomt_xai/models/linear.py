from __future__ import annotations

import numpy as np

from ..errors import DataError, DivergenceError, PreconditionError
from ..tabular import FeatureTable, require_binary
from .base import TrainedModel, sigmoid


def logistic_loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss plus ``l2/2 * ||w||^2`` and its gradient in ``(w, b)``.

    The bias is not regularised.
    """
    z = X @ w + b
    # log(1 + e^z) - y z  ==  -[y log s + (1-y) log(1-s)]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = (sigmoid(z) - y) / X.shape[0]
    return loss, X.T @ r + l2 * w, float(r.sum())


class LogisticRegressionModel(TrainedModel):
    kind = "logistic_regression"

    def __init__(self, feature_names, weights, bias: float, loss_history=(), hyper: dict | None = None) -> None:
        super().__init__(feature_names)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.loss_history = list(loss_history)
        self.hyper = dict(hyper or {})

    def _positive_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(X @ self.weights + self.bias)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "loss_history": self.loss_history,
            "hyper": self.hyper,
        }

    @classmethod
    def from_dict(cls, feature_names, d: dict) -> "LogisticRegressionModel":
        return cls(feature_names, d["weights"], d["bias"], d.get("loss_history", ()), d.get("hyper"))


def train_logistic_regression(
    train: FeatureTable,
    l2: float = 1e-4,
    lr: float = 0.5,
    epochs: int = 2000,
    seed: int = 0,
) -> LogisticRegressionModel:
    """Full-batch gradient descent from zero weights.

    Raises :class:`DivergenceError` if the loss becomes non-finite or rises by
    more than 1e-9 between epochs (the learning rate is then too large).
    ``seed`` is recorded only; the procedure itself is deterministic.
    """
    if train.n_rows == 0:
        raise DataError("cannot train on an empty table")
    if lr <= 0 or l2 < 0 or epochs < 0:
        raise PreconditionError("need lr > 0, l2 >= 0, epochs >= 0")
    X = train.values
    y = require_binary(train).astype(np.float64)
    w = np.zeros(X.shape[1])
    b = 0.0
    history = []
    prev = np.inf
    for epoch in range(epochs + 1):
        loss, gw, gb = logistic_loss_and_grad(w, b, X, y, l2)
        if not np.isfinite(loss):
            raise DivergenceError(f"logistic regression loss became non-finite at epoch {epoch}")
        if loss > prev + 1e-9:
            raise DivergenceError(
                f"loss increased at epoch {epoch} ({prev:.6g} -> {loss:.6g}); use a smaller learning rate"
            )
        history.append(loss)
        prev = loss
        if epoch == epochs:
            break
        w = w - lr * gw
        b = b - lr * gb
    hyper = {"l2": l2, "lr": lr, "epochs": epochs, "seed": seed}
    return LogisticRegressionModel(train.column_names, w, b, history, hyper)
