"""Fully connected ReLU network with a sigmoid output, trained by mini-batch SGD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DivergenceError, PreconditionError
from ..tabular import FeatureTable, require_binary
from .base import TrainedModel, sigmoid

Layers = list[tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class DenseNetParams:
    widths: tuple[int, ...] = (120, 80, 40, 20, 1)
    learning_rate: float = 0.01
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        widths = tuple(int(w) for w in self.widths)
        if not widths or widths[-1] != 1:
            raise PreconditionError("the final layer must have width 1")
        if min(widths) < 1:
            raise PreconditionError("layer widths must be >= 1")
        object.__setattr__(self, "widths", widths)

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


def init_layers(n_inputs: int, widths, rng: np.random.Generator) -> Layers:
    """He-normal weights, zero biases."""
    layers = []
    fan_in = n_inputs
    for width in widths:
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, width))
        layers.append((W, np.zeros(width)))
        fan_in = width
    return layers


def forward(layers: Layers, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Return output logits and the list of layer inputs (for backprop)."""
    acts = [X]
    a = X
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        if i < len(layers) - 1:
            a = np.maximum(z, 0.0)
            acts.append(a)
        else:
            return z[:, 0], acts
    raise PreconditionError("network has no layers")


def loss_and_grads(layers: Layers, X: np.ndarray, y: np.ndarray) -> tuple[float, Layers]:
    """Mean binary cross-entropy and its gradient for every ``(W, b)``."""
    logits, acts = forward(layers, X)
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    delta = ((sigmoid(logits) - y) / X.shape[0])[:, None]
    grads: Layers = []
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a_in = acts[i]
        grads.append((a_in.T @ delta, delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ W.T) * (a_in > 0)
    grads.reverse()
    return loss, grads


class DenseNetModel(TrainedModel):
    kind = "dense_net"

    def __init__(self, feature_names, layers: Layers, params: DenseNetParams, loss_history=()) -> None:
        super().__init__(feature_names)
        self.layers = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64)) for W, b in layers]
        self.params = params
        self.loss_history = list(loss_history)

    def _positive_proba(self, X: np.ndarray) -> np.ndarray:
        logits, _ = forward(self.layers, X)
        return sigmoid(logits)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers],
            "loss_history": self.loss_history,
        }

    @classmethod
    def from_dict(cls, feature_names, d: dict) -> "DenseNetModel":
        p = d["params"]
        params = DenseNetParams(tuple(p["widths"]), p["learning_rate"], p["epochs"], p["batch_size"], p["seed"])
        layers = [(np.asarray(l["W"]), np.asarray(l["b"])) for l in d["layers"]]
        return cls(feature_names, layers, params, d.get("loss_history", ()))


def train_dense_net(train: FeatureTable, params: DenseNetParams = DenseNetParams()) -> DenseNetModel:
    """Mini-batch SGD on binary cross-entropy.

    ``loss_history[e]`` is the full training loss after ``e`` epochs
    (entry 0 is the loss at initialisation).
    """
    if train.n_rows == 0:
        raise DataError("cannot train on an empty table")
    X = train.values
    y = require_binary(train).astype(np.float64)
    rng = np.random.default_rng(int(params.seed))
    layers = init_layers(X.shape[1], params.widths, rng)
    history = [loss_and_grads(layers, X, y)[0]]
    n = X.shape[0]
    for epoch in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            batch = order[start : start + params.batch_size]
            _, grads = loss_and_grads(layers, X[batch], y[batch])
            layers = [(W - params.learning_rate * gW, b - params.learning_rate * gb)
                      for (W, b), (gW, gb) in zip(layers, grads)]
        loss = loss_and_grads(layers, X, y)[0]
        if not np.isfinite(loss):
            raise DivergenceError(f"dense net loss became non-finite in epoch {epoch + 1}")
        history.append(loss)
    return DenseNetModel(train.column_names, layers, params, history)
