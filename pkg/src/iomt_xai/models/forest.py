"""Random forest of Gini-impurity CART trees, written against numpy only."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, PreconditionError
from ..tabular import FeatureTable, require_binary
from .base import TrainedModel


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(p))
    bootstrap: bool = True
    seed: int = 0

    def resolve_features(self, p: int) -> int:
        m = self.features_per_split if self.features_per_split is not None else math.ceil(math.sqrt(p))
        if not 1 <= m <= p:
            raise PreconditionError(f"features_per_split={m} must lie in [1, {p}]")
        return m

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }


@dataclass
class Tree:
    """Flat array encoding of one tree. ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # P(class 1) at the node

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


def _best_split(x: np.ndarray, y: np.ndarray) -> tuple[float, float] | None:
    """Lowest weighted child Gini impurity over thresholds of one feature.

    Returns ``(child_impurity, threshold)`` or ``None`` if ``x`` is constant.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = xs.shape[0]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    pos_left = np.cumsum(ys)[:-1].astype(np.float64)
    pos_right = ys.sum() - pos_left
    imp = (2.0 * pos_left * (n_left - pos_left) / n_left
           + 2.0 * pos_right * (n_right - pos_right) / n_right) / n
    imp = np.where(valid, imp, np.inf)
    i = int(np.argmin(imp))
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(imp[i]), float(thr)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    features_per_split: int,
    max_depth: int | None = None,
    min_samples_split: int = 2,
) -> Tree:
    """Grow one CART tree on ``(X, y)`` with Gini splits.

    At every node ``features_per_split`` candidate features are drawn without
    replacement; ties in impurity go to the lower feature index. If none of
    the candidates can split the node, the remaining features are tried in
    random order before giving up.
    """
    p = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    root = np.arange(X.shape[0])
    stack = [(new_node(root), root, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yy = y[idx]
        n = idx.shape[0]
        pos = yy.sum()
        if pos == 0 or pos == n or n < min_samples_split:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        perm = rng.permutation(p)
        groups = [np.sort(perm[:features_per_split]), perm[features_per_split:]]
        best = None
        for group in groups:
            for f in group:
                res = _best_split(X[idx, f], yy)
                if res is None:
                    continue
                if best is None or res[0] < best[0]:
                    best = (res[0], int(f), res[1])
            if best is not None:
                break
        if best is None:
            continue
        _, f, thr = best
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        li, ri = idx[go_left], idx[~go_left]
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
    )


class RandomForestModel(TrainedModel):
    kind = "random_forest"

    def __init__(self, feature_names, trees: list[Tree], params: ForestParams, degenerate: bool = False) -> None:
        super().__init__(feature_names)
        self.trees = list(trees)
        self.params = params
        self.degenerate = degenerate

    def _positive_proba(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            node = np.zeros(X.shape[0], dtype=np.int64)
            active = np.arange(X.shape[0])
            while active.size:
                nd = node[active]
                f = tree.feature[nd]
                internal = f >= 0
                active, nd, f = active[internal], nd[internal], f[internal]
                go_left = X[active, f] <= tree.threshold[nd]
                node[active] = np.where(go_left, tree.left[nd], tree.right[nd])
            total += tree.value[node]
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "degenerate": self.degenerate,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, feature_names, d: dict) -> "RandomForestModel":
        return cls(
            feature_names,
            [Tree.from_dict(t) for t in d["trees"]],
            ForestParams(**d["params"]),
            bool(d.get("degenerate", False)),
        )


def train_random_forest(train: FeatureTable, params: ForestParams = ForestParams()) -> RandomForestModel:
    """Fit ``params.n_trees`` CART trees, each on its own bootstrap sample.

    Tree ``t`` draws from ``default_rng([seed, t])`` so results do not depend
    on the order trees are grown in.
    """
    if train.n_rows == 0:
        raise DataError("cannot train on an empty table")
    if params.n_trees < 1:
        raise PreconditionError("n_trees must be >= 1")
    if not np.isfinite(train.values).all():
        raise PreconditionError("training data contains NaN or inf")
    X = train.values
    y = require_binary(train).astype(np.int64)
    m = params.resolve_features(X.shape[1])
    degenerate = np.unique(y).size < 2
    n = X.shape[0]
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng([int(params.seed), t])
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(grow_tree(X[idx], y[idx], rng, m, params.max_depth, params.min_samples_split))
    return RandomForestModel(train.column_names, trees, params, degenerate)
