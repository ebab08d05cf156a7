"""Versioned JSON serialisation for trained models."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import DataError
from .base import TrainedModel
from .dense import DenseNetModel
from .forest import RandomForestModel
from .knn import KNNModel
from .linear import LogisticRegressionModel

MODEL_SCHEMA_VERSION = 1

_REGISTRY = {
    cls.kind: cls
    for cls in (RandomForestModel, LogisticRegressionModel, KNNModel, DenseNetModel)
}


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "model": model.to_dict(),
    }


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise DataError(f"unsupported model schema_version {d.get('schema_version')!r}")
    try:
        cls = _REGISTRY[d["kind"]]
    except KeyError:
        raise DataError(f"unknown model kind {d.get('kind')!r}") from None
    return cls.from_dict(tuple(d["feature_names"]), d["model"])


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), separators=(",", ":")))


def load_model(path: str | Path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text()))
