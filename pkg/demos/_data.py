"""Shared setup for the demos: a scaled, balanced synthetic dataset and a forest."""

from iomt_xai.models import ForestParams, train_random_forest, train_test_split
from iomt_xai.synthetic import BALANCED_COUNTS, make_iomt_like
from iomt_xai.tabular import apply_scaler, binarize_labels, fit_scaler


def desk_data(seed=0):
    raw = make_iomt_like(BALANCED_COUNTS, seed=seed)
    scaler = fit_scaler(raw)
    table = binarize_labels(apply_scaler(raw, scaler))
    train, test = train_test_split(table, 0.25, stratify=True, seed=seed)
    return scaler, train, test


def desk_forest(train, n_trees=100):
    return train_random_forest(train, ForestParams(n_trees=n_trees, seed=0))
