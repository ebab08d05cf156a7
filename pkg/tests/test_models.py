from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import toy_table
from iomt_xai.errors import DataError, DivergenceError, PreconditionError
from iomt_xai.models import (
    DenseNetParams,
    ForestParams,
    load_model,
    save_model,
    train_dense_net,
    train_knn,
    train_logistic_regression,
    train_random_forest,
    train_test_split,
)
from iomt_xai.models.base import sigmoid
from iomt_xai.models.dense import DenseNetModel, forward, init_layers, loss_and_grads
from iomt_xai.models.linear import LogisticRegressionModel, logistic_loss_and_grad
from iomt_xai.models.metrics import confusion_matrix, report_from_confusion


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def checkerboard(n=400, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.25, 0.25], [0.75, 0.75], [0.25, 0.75], [0.75, 0.25]])
    cls = np.repeat([0, 0, 1, 1], n // 4)
    X = centers[np.repeat(np.arange(4), n // 4)] + rng.normal(0, 0.05, size=(n, 2))
    return toy_table(X, np.where(cls == 1, "DDoS", "Normal"))


# ---------------------------------------------------------------- forest


def test_forest_fits_checkerboard():
    t = checkerboard()
    model = train_random_forest(t, ForestParams(n_trees=100, seed=0))
    assert (model.predict(t.values) == t.binary).all()


def test_forest_single_class_degenerate():
    t = toy_table(np.random.default_rng(0).normal(size=(20, 3)), ["Normal"] * 20)
    model = train_random_forest(t, ForestParams(n_trees=5))
    assert model.degenerate
    assert np.array_equal(model.predict_proba(np.random.default_rng(1).normal(size=(7, 3))),
                          np.tile([1.0, 0.0], (7, 1)))


def test_forest_empty_table():
    with pytest.raises(DataError):
        train_random_forest(toy_table(np.zeros((0, 2)), []))


def test_forest_deterministic(desk_split):
    train, test = desk_split
    small = train.take(np.arange(400))
    a = train_random_forest(small, ForestParams(n_trees=10, seed=3))
    b = train_random_forest(small, ForestParams(n_trees=10, seed=3))
    c = train_random_forest(small, ForestParams(n_trees=10, seed=4))
    pa, pb, pc = (m.positive_proba(test.values) for m in (a, b, c))
    assert np.array_equal(pa, pb) and not np.array_equal(pa, pc)


def test_forest_features_per_split_bound():
    with pytest.raises(PreconditionError):
        train_random_forest(checkerboard(40), ForestParams(n_trees=1, features_per_split=3))


def test_forest_leaf_frequency_mean():
    # without bootstrap and with depth 0 every tree is the training class frequency
    t = toy_table(np.arange(10.0), ["DDoS"] * 3 + ["Normal"] * 7)
    model = train_random_forest(t, ForestParams(n_trees=3, max_depth=0, bootstrap=False))
    assert model.positive_proba([[5.0]])[0] == pytest.approx(0.3)


def test_forest_duplicate_monotonicity():
    rng = np.random.default_rng(0)
    failures = 0
    for trial in range(20):
        X = rng.uniform(size=(60, 3))
        y = (X[:, 0] + 0.3 * rng.normal(size=60) > 0.5)
        t = toy_table(X, np.where(y, "DDoS", "Normal"))
        i = int(rng.integers(60))
        params = ForestParams(n_trees=25, seed=trial)
        before = train_random_forest(t, params).predict_proba(X[i])[0, t.binary[i]]
        bigger = t.take(np.concatenate([np.arange(60), np.full(5, i)]))
        after = train_random_forest(bigger, params).predict_proba(X[i])[0, t.binary[i]]
        failures += after < before
    assert failures <= 1


# ---------------------------------------------------------------- logistic regression


def test_lr_zero_weights_half():
    m = LogisticRegressionModel(("a", "b"), np.zeros(2), 0.0)
    assert np.array_equal(m.predict_proba(np.random.default_rng(0).normal(size=(5, 2))), np.full((5, 2), 0.5))
    assert (m.predict(np.ones((3, 2))) == 0).all()  # tie goes to class 0


def test_lr_separable_1d():
    x = np.linspace(-1, 1, 200)
    x = x[x != 0]
    t = toy_table(x, np.where(x > 0, "DDoS", "Normal"))
    m = train_logistic_regression(t, epochs=500)
    assert (m.predict(t.values) == t.binary).all()
    hist = np.array(m.loss_history)
    assert (np.diff(hist) <= 1e-9).all()


def test_lr_gradient_finite_differences():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(30, 5)), rng.integers(0, 2, 30).astype(float)
    worst = 0.0
    for _ in range(10):
        w, b = rng.normal(size=5), float(rng.normal())
        _, gw, gb = logistic_loss_and_grad(w, b, X, y, 0.1)
        h = 1e-6
        num = np.array([
            (logistic_loss_and_grad(w + h * e, b, X, y, 0.1)[0] - logistic_loss_and_grad(w - h * e, b, X, y, 0.1)[0]) / (2 * h)
            for e in np.eye(5)
        ])
        nb = (logistic_loss_and_grad(w, b + h, X, y, 0.1)[0] - logistic_loss_and_grad(w, b - h, X, y, 0.1)[0]) / (2 * h)
        worst = max(worst, rel_err(gw, num), rel_err(gb, nb))
    assert worst < 1e-6


def test_lr_divergence_detected():
    x = np.linspace(-1, 1, 50)
    t = toy_table(np.column_stack([x * 100, x]), np.where(x > 0, "DDoS", "Normal"))
    with pytest.raises(DivergenceError, match="smaller learning rate"):
        train_logistic_regression(t, lr=50.0, epochs=50)


# ---------------------------------------------------------------- knn


def test_knn_k1_training_point():
    rng = np.random.default_rng(0)
    t = toy_table(rng.normal(size=(30, 2)), rng.choice(["Normal", "DDoS"], 30))
    m = train_knn(t, 1)
    p = m.predict_proba(t.values)
    assert np.array_equal(p[np.arange(30), t.binary], np.ones(30))


def test_knn_three_neighbours():
    t = toy_table([0.0, 0.1, 0.2, 5.0], ["Normal", "Normal", "DDoS", "DDoS"])
    m = train_knn(t, 3)
    assert m.predict_proba([[0.05]])[0] == pytest.approx([2 / 3, 1 / 3])
    assert m.predict([[0.05]])[0] == 0


def test_knn_distance_tie_lower_index():
    t = toy_table([-1.0, 1.0], ["DDoS", "Normal"])
    assert train_knn(t, 1).predict([[0.0]])[0] == 1


def test_knn_brute_force():
    rng = np.random.default_rng(5)
    X = rng.integers(0, 4, size=(200, 2)).astype(float)  # many exact distance ties
    t = toy_table(X, rng.choice(["Normal", "DDoS"], 200))
    Q = rng.integers(0, 4, size=(50, 2)).astype(float) + 0.5 * rng.integers(0, 2, size=(50, 2))
    m = train_knn(t, 7)
    for q, got in zip(Q, m.positive_proba(Q)):
        d = [float(((X[i] - q) ** 2).sum()) for i in range(200)]
        order = sorted(range(200), key=lambda i: (d[i], i))[:7]
        assert got == pytest.approx(np.mean(t.binary[order]), abs=0)


def test_knn_k_too_large():
    with pytest.raises(PreconditionError):
        train_knn(toy_table([0.0, 1.0], ["Normal", "DDoS"]), 3)


# ---------------------------------------------------------------- dense net


def test_dense_zero_weights_output_sigmoid_bias():
    layers = init_layers(4, (3, 1), np.random.default_rng(0))
    layers = [(np.zeros_like(W), np.zeros_like(b)) for W, b in layers]
    layers[-1] = (layers[-1][0], np.array([0.7]))
    m = DenseNetModel(tuple("abcd"), layers, DenseNetParams((3, 1)))
    assert np.allclose(m.positive_proba(np.random.default_rng(1).normal(size=(6, 4))), sigmoid(np.array([0.7])))


def dense_gradient_error(seed=0, widths=(3, 1), n_in=4, n=10):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(n, n_in)), rng.integers(0, 2, n).astype(float)
    worst = 0.0
    for _ in range(10):
        layers = init_layers(n_in, widths, rng)
        layers = [(W, rng.normal(0, 0.1, size=b.shape)) for W, b in layers]
        _, grads = loss_and_grads(layers, X, y)
        h = 1e-6
        for li, (W, b) in enumerate(layers):
            for arr, g in ((W, grads[li][0]), (b, grads[li][1])):
                num = np.zeros_like(arr)
                for idx in np.ndindex(arr.shape):
                    old = arr[idx]
                    arr[idx] = old + h
                    up = loss_and_grads(layers, X, y)[0]
                    arr[idx] = old - h
                    down = loss_and_grads(layers, X, y)[0]
                    arr[idx] = old
                    num[idx] = (up - down) / (2 * h)
                worst = max(worst, rel_err(g, num))
    return worst


def test_dense_gradient_check_431():
    assert dense_gradient_error() < 1e-4


def test_dense_forward_shapes():
    layers = init_layers(5, (120, 80, 40, 20, 1), np.random.default_rng(0))
    logits, acts = forward(layers, np.ones((7, 5)))
    assert logits.shape == (7,) and [a.shape[1] for a in acts] == [5, 120, 80, 40, 20]


def test_dense_params_validation():
    with pytest.raises(PreconditionError):
        DenseNetParams((10, 2))
    with pytest.raises(PreconditionError):
        DenseNetParams((0, 1))


def test_dense_training_reduces_loss(desk_split):
    train, _ = desk_split
    m = train_dense_net(train.take(np.arange(600)), DenseNetParams(epochs=5, seed=1))
    assert len(m.loss_history) == 6 and m.loss_history[-1] < m.loss_history[0]
    again = train_dense_net(train.take(np.arange(600)), DenseNetParams(epochs=5, seed=1))
    assert again.loss_history == m.loss_history


# ---------------------------------------------------------------- metrics


def test_metrics_perfect():
    y = np.array([0, 1, 1, 0, 1])
    r = report_from_confusion(confusion_matrix(y, y))
    assert r.fp == r.fn == 0
    assert r.accuracy == r.precision_macro == r.recall_weighted == r.f1_weighted == 1.0


def test_metrics_worked_example():
    r = report_from_confusion([[45, 5], [10, 40]])
    assert r.accuracy == pytest.approx(0.85)
    assert r.precision[1] == pytest.approx(40 / 45)
    assert r.recall[1] == pytest.approx(0.8)
    assert r.f1[1] == pytest.approx(2 * (40 / 45) * 0.8 / (40 / 45 + 0.8))


def test_metrics_absent_class_flagged():
    r = report_from_confusion([[10, 0], [0, 0]])
    assert r.precision[1] == 0 and r.recall[1] == 0 and r.flags


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 80))
def test_metrics_counting_oracle(seed, n):
    rng = np.random.default_rng(seed)
    y, yp = rng.integers(0, 2, n), rng.integers(0, 2, n)
    r = report_from_confusion(confusion_matrix(y, yp))
    tally = Counter(zip(y.tolist(), yp.tolist()))
    assert r.tp == tally[(1, 1)] and r.tn == tally[(0, 0)]
    assert r.fp == tally[(0, 1)] and r.fn == tally[(1, 0)]
    assert r.accuracy == pytest.approx(np.mean(y == yp))
    prec, rec, f1, sup = [], [], [], []
    for c in (0, 1):
        pp = sum(1 for p in yp if p == c)
        ap = sum(1 for t in y if t == c)
        hit = sum(1 for t, p in zip(y, yp) if t == p == c)
        pr = hit / pp if pp else 0.0
        rc = hit / ap if ap else 0.0
        prec.append(pr)
        rec.append(rc)
        f1.append(2 * pr * rc / (pr + rc) if pr + rc else 0.0)
        sup.append(ap)
    assert r.precision == pytest.approx(prec) and r.recall == pytest.approx(rec) and r.f1 == pytest.approx(f1)
    assert r.precision_macro == pytest.approx(np.mean(prec))
    assert r.f1_weighted == pytest.approx(np.dot(f1, sup) / n)


# ---------------------------------------------------------------- split


def test_split_4000_stratified(desk_table):
    train, test = train_test_split(desk_table, 0.25, True, 0)
    assert (train.n_rows, test.n_rows) == (3000, 1000)
    for c in (0, 1):
        assert abs((test.binary == c).sum() - 0.25 * (desk_table.binary == c).sum()) <= 1


def test_split_union_and_determinism(desk_table):
    small = desk_table.take(np.arange(301))
    a_tr, a_te = train_test_split(small, 0.3, True, 9)
    b_tr, b_te = train_test_split(small, 0.3, True, 9)
    assert a_tr.equals(b_tr) and a_te.equals(b_te)
    whole = Counter(map(tuple, small.values.tolist()))
    assert Counter(map(tuple, a_tr.values.tolist())) + Counter(map(tuple, a_te.values.tolist())) == whole


def test_split_empty_side():
    with pytest.raises(PreconditionError):
        train_test_split(toy_table([0.0, 1.0], ["Normal", "DDoS"]), 0.1)


# ---------------------------------------------------------------- shared model contract


@pytest.fixture(scope="module")
def zoo(desk_split):
    train, _ = desk_split
    small = train.take(np.arange(500))
    return [
        train_random_forest(small, ForestParams(n_trees=10)),
        train_logistic_regression(small, epochs=200),
        train_knn(small, 5),
        train_dense_net(small, DenseNetParams(epochs=2)),
    ]


def test_simplex_and_argmax(zoo, desk_split):
    _, test = desk_split
    for m in zoo:
        p = m.predict_proba(test.values[:200])
        assert (p >= 0).all() and np.allclose(p.sum(axis=1), 1, atol=1e-9)
        assert np.array_equal(m.predict(test.values[:200]), (p[:, 1] > p[:, 0]).astype(int))


def test_serialisation_round_trip(zoo, desk_split, tmp_path):
    _, test = desk_split
    probes = test.values[:100]
    for m in zoo:
        save_model(m, tmp_path / f"{m.kind}.json")
        back = load_model(tmp_path / f"{m.kind}.json")
        assert back.kind == m.kind and back.feature_names == m.feature_names
        assert np.array_equal(back.predict_proba(probes), m.predict_proba(probes))
