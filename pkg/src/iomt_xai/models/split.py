from __future__ import annotations

import math

import numpy as np

from ..errors import PreconditionError
from ..tabular import FeatureTable, require_binary


def train_test_split(
    table: FeatureTable, test_fraction: float = 0.25, stratify: bool = True, seed: int = 0
) -> tuple[FeatureTable, FeatureTable]:
    """Split rows into disjoint train/test tables, row order preserved.

    With ``stratify`` each binary class contributes ``round(fraction * count)``
    rows (half rounds up) to the test side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise PreconditionError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(int(seed))
    if stratify:
        y = require_binary(table)
        groups = [np.flatnonzero(y == c) for c in (0, 1)]
    else:
        groups = [np.arange(table.n_rows)]
    test_parts = []
    for rows in groups:
        n_test = math.floor(test_fraction * rows.size + 0.5)
        test_parts.append(rng.permutation(rows)[:n_test])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.zeros(table.n_rows, dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)
    if test_idx.size == 0 or train_idx.size == 0:
        raise PreconditionError(
            f"test_fraction={test_fraction} leaves an empty side ({train_idx.size} train / {test_idx.size} test)"
        )
    return table.take(train_idx), table.take(test_idx)
