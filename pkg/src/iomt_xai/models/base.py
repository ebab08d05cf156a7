from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import PreconditionError
from ..tabular import FeatureTable

KINDS = ("random_forest", "logistic_regression", "knn", "dense_net")


def as_matrix(X, feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Coerce a table, a single row or a 2-D array into a float64 matrix."""
    if isinstance(X, FeatureTable):
        if feature_names is not None and X.column_names != tuple(feature_names):
            X = X.select_columns(feature_names)
        return X.values
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise PreconditionError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if feature_names is not None and X.shape[1] != len(feature_names):
        raise PreconditionError(
            f"model expects {len(feature_names)} features, got {X.shape[1]}"
        )
    return X


class TrainedModel:
    """Binary classifier exposing ``predict_proba``/``predict``.

    Subclasses implement :meth:`_positive_proba` returning P(class 1) per row.
    """

    kind: str = "abstract"

    def __init__(self, feature_names: Sequence[str]) -> None:
        self.feature_names = tuple(feature_names)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _positive_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def positive_proba(self, X) -> np.ndarray:
        p1 = np.asarray(self._positive_proba(as_matrix(X, self.feature_names)), dtype=np.float64)
        return np.clip(p1, 0.0, 1.0)

    def predict_proba(self, X) -> np.ndarray:
        p1 = self.positive_proba(X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return (proba[:, 1] > proba[:, 0]).astype(np.int64)

    def to_dict(self) -> dict:
        raise NotImplementedError


class FunctionModel(TrainedModel):
    """Wrap a plain function ``f(X) -> P(class 1)`` as a model.

    Handy for analytic test models. Outputs are *not* clipped: linear
    combinations of probabilities are allowed so that attribution linearity
    can be exercised.
    """

    kind = "function"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], feature_names: Sequence[str]) -> None:
        super().__init__(feature_names)
        self.fn = fn

    def _positive_proba(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(X), dtype=np.float64).reshape(-1)

    def positive_proba(self, X) -> np.ndarray:
        return self._positive_proba(as_matrix(X, self.feature_names))

    def predict_proba(self, X) -> np.ndarray:
        p1 = np.clip(self.positive_proba(X), 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])


def positive_output(model) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``X -> P(class 1)`` for a model or for a bare callable."""
    if hasattr(model, "positive_proba"):
        return model.positive_proba
    if hasattr(model, "predict_proba"):
        return lambda X: np.asarray(model.predict_proba(X))[:, 1]
    if callable(model):
        return lambda X: np.asarray(model(X), dtype=np.float64).reshape(-1)
    raise TypeError(f"{type(model).__name__} is neither a model nor a callable")


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
