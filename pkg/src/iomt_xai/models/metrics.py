from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PreconditionError
from ..tabular import FeatureTable, require_binary


@dataclass
class EvalReport:
    """Binary classification metrics.

    ``confusion[t][p]`` counts rows with true class ``t`` predicted as ``p``,
    so ``[[TN, FP], [FN, TP]]``. Per-class lists are indexed by class.
    """

    confusion: list[list[int]]
    accuracy: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    precision_macro: float
    recall_macro: float
    f1_macro: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    flags: list[str] = field(default_factory=list)

    @property
    def tp(self) -> int:
        return self.confusion[1][1]

    @property
    def tn(self) -> int:
        return self.confusion[0][0]

    @property
    def fp(self) -> int:
        return self.confusion[0][1]

    @property
    def fn(self) -> int:
        return self.confusion[1][0]

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "precision_weighted": self.precision_weighted,
            "recall_weighted": self.recall_weighted,
            "f1_weighted": self.f1_weighted,
            "flags": self.flags,
        }


def report_from_confusion(confusion) -> EvalReport:
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.shape != (2, 2) or (cm < 0).any():
        raise PreconditionError("confusion matrix must be 2x2 non-negative counts")
    total = int(cm.sum())
    if total == 0:
        raise PreconditionError("cannot evaluate on zero samples")
    flags = []
    precision, recall, f1 = [], [], []
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    for c in (0, 1):
        tp = cm[c, c]
        if predicted[c] == 0:
            flags.append(f"class {c} never predicted; precision set to 0")
            p = 0.0
        else:
            p = tp / predicted[c]
        if support[c] == 0:
            flags.append(f"class {c} absent from the test set; recall set to 0")
            r = 0.0
        else:
            r = tp / support[c]
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(2 * p * r / (p + r)) if p + r > 0 else 0.0)
    weights = support / total
    return EvalReport(
        confusion=cm.tolist(),
        accuracy=float((cm[0, 0] + cm[1, 1]) / total),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support.tolist(),
        precision_macro=float(np.mean(precision)),
        recall_macro=float(np.mean(recall)),
        f1_macro=float(np.mean(f1)),
        precision_weighted=float(weights @ precision),
        recall_weighted=float(weights @ recall),
        f1_weighted=float(weights @ f1),
        flags=flags,
    )


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise PreconditionError("label vectors differ in length")
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def evaluate(model, test: FeatureTable) -> EvalReport:
    if test.n_rows == 0:
        raise PreconditionError("test table is empty")
    y_true = require_binary(test)
    y_pred = model.predict(test)
    return report_from_confusion(confusion_matrix(y_true, y_pred))
