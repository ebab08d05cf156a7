"""Binary classifiers and their evaluation."""

from .base import KINDS, FunctionModel, TrainedModel, as_matrix, positive_output
from .dense import DenseNetModel, DenseNetParams, train_dense_net
from .forest import ForestParams, RandomForestModel, train_random_forest
from .io import load_model, model_from_dict, model_to_dict, save_model
from .knn import KNNModel, train_knn
from .linear import LogisticRegressionModel, logistic_loss_and_grad, train_logistic_regression
from .metrics import EvalReport, confusion_matrix, evaluate, report_from_confusion
from .split import train_test_split

__all__ = [
    "KINDS",
    "DenseNetModel",
    "DenseNetParams",
    "EvalReport",
    "ForestParams",
    "FunctionModel",
    "KNNModel",
    "LogisticRegressionModel",
    "RandomForestModel",
    "TrainedModel",
    "as_matrix",
    "confusion_matrix",
    "evaluate",
    "load_model",
    "logistic_loss_and_grad",
    "model_from_dict",
    "model_to_dict",
    "positive_output",
    "report_from_confusion",
    "save_model",
    "train_dense_net",
    "train_knn",
    "train_logistic_regression",
    "train_random_forest",
    "train_test_split",
]
