import numpy as np
import pytest

from iomt_xai.models import ForestParams, train_random_forest, train_test_split
from iomt_xai.synthetic import BALANCED_COUNTS, make_iomt_like
from iomt_xai.tabular import FeatureTable, apply_scaler, binarize_labels, fit_scaler


def scaled_binary(table: FeatureTable) -> FeatureTable:
    return binarize_labels(apply_scaler(table, fit_scaler(table)))


@pytest.fixture(scope="session")
def desk_table() -> FeatureTable:
    """4000-row balanced synthetic dataset, scaled to [0, 1] and binarized."""
    return scaled_binary(make_iomt_like(BALANCED_COUNTS, seed=0))


@pytest.fixture(scope="session")
def desk_split(desk_table):
    return train_test_split(desk_table, 0.25, stratify=True, seed=0)


@pytest.fixture(scope="session")
def desk_forest(desk_split):
    train, _ = desk_split
    return train_random_forest(train, ForestParams(n_trees=100, seed=0))


def toy_table(values, labels, names=None, binary=True) -> FeatureTable:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = names or tuple(f"f{j}" for j in range(values.shape[1]))
    labels = np.asarray(labels, dtype=object)
    table = FeatureTable(tuple(names), values, "Label", labels)
    if binary:
        table = FeatureTable(table.column_names, table.values, "Label", table.labels,
                             np.array([0 if lbl in ("Normal", 0, "0") else 1 for lbl in labels]))
    return table


def brute_spearman(a, b):
    """Average ranks by counting, then the Pearson formula."""
    def ranks(v):
        return np.array([np.sum(v < x) + (np.sum(v == x) + 1) / 2 for x in v])

    ra, rb = ranks(np.asarray(a)), ranks(np.asarray(b))
    n = len(a)
    ma, mb = sum(ra) / n, sum(rb) / n
    num = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    den = (sum((x - ma) ** 2 for x in ra) * sum((y - mb) ** 2 for y in rb)) ** 0.5
    return num / den


# ---------------------------------------------------------------- acceptance summary

_CRITERIA: dict[str, tuple[int, str]] = {}
_OUTCOMES: dict[int, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            _CRITERIA[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    n = _CRITERIA[report.nodeid][0]
    if report.failed:
        _OUTCOMES[n] = "FAIL"
    elif report.skipped:
        _OUTCOMES[n] = "SKIP"
    elif report.when == "call":
        _OUTCOMES.setdefault(n, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in sorted(_CRITERIA.values()):
        if n in _OUTCOMES:
            terminalreporter.write_line(f"criterion {n:>2}  {_OUTCOMES[n]:<4}  {title}")
