from __future__ import annotations

import numpy as np

from ..errors import PreconditionError
from ..tabular import FeatureTable, require_binary
from .base import TrainedModel


def nearest_indices(train: np.ndarray, queries: np.ndarray, k: int, chunk: int = 128) -> np.ndarray:
    """Row indices of the ``k`` Euclidean-nearest training rows per query.

    Distance ties go to the lower training row index.
    """
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start : start + chunk]
        d2 = ((q[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
        out[start : start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


class KNNModel(TrainedModel):
    kind = "knn"

    def __init__(self, feature_names, X: np.ndarray, y: np.ndarray, k: int) -> None:
        super().__init__(feature_names)
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.k = int(k)

    def _positive_proba(self, X: np.ndarray) -> np.ndarray:
        return self.y[nearest_indices(self.X, X, self.k)].mean(axis=1)

    def to_dict(self) -> dict:
        return {"k": self.k, "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, feature_names, d: dict) -> "KNNModel":
        return cls(feature_names, np.asarray(d["X"]).reshape(-1, len(feature_names)), d["y"], d["k"])


def train_knn(train: FeatureTable, k: int = 5) -> KNNModel:
    if k < 1:
        raise PreconditionError("k must be >= 1")
    if k > train.n_rows:
        raise PreconditionError(f"k={k} exceeds the {train.n_rows} training rows")
    return KNNModel(train.column_names, train.values, require_binary(train), k)
