"""Deterministic synthetic IoMT-like telemetry for tests and demos.

Every feature is lognormal with its own raw scale, like byte counters and
CPU times in real host/network telemetry. Every attack class shifts a fixed
subset of features ("signature") by a few log-scale standard deviations,
some up and some down, so attack-vs-normal is not linearly separable on any
single feature while staying easy for trees.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .tabular import FeatureTable, write_csv

FEATURE_NAMES = (
    "SrcBytes", "DstBytes", "SrcLoad", "DstLoad", "SrcJitter",
    "DstJitter", "SIntPkt", "DIntPkt", "SIntPktAct", "sMinPktSz",
    "dMinPktSz", "TotPkts", "Dur", "scputimes_user", "scputimes_system",
    "scputimes_idle", "scputimes_iowait", "stats_soft_interrupts", "svmem_free", "svmem_used",
)
ATTACKS = ("DDoS", "MitM", "Ransomware", "Buffer_Overflow")
BALANCED_COUNTS = {"Normal": 2000, "DDoS": 500, "MitM": 500, "Ransomware": 500, "Buffer_Overflow": 500}
# raw WUSTL-HDRL-2024 class counts scaled by 1/100; Buffer_Overflow raised to 10 so SMOTE has neighbours
IMBALANCED_COUNTS = {"Normal": 1300, "DDoS": 100, "MitM": 17, "Ransomware": 5, "Buffer_Overflow": 10}
DESK_COUNTS = {"Normal": 3000, "DDoS": 600, "MitM": 300, "Ransomware": 150, "Buffer_Overflow": 40}


def _structure(seed: int):
    rng = np.random.default_rng([seed, 0xFEED])
    p = len(FEATURE_NAMES)
    means = 10.0 ** rng.uniform(0.0, 4.0, size=p)
    log_sd = rng.uniform(0.5, 1.0, size=p)
    shifts = {}
    order = rng.permutation(p)
    for i, attack in enumerate(ATTACKS):
        delta = np.zeros(p)
        own = order[5 * i : 5 * i + 5]
        delta[own] = rng.uniform(2.5, 4.0, size=5) * rng.choice([-1.0, 1.0], size=5)
        # borrow two features of the next attack with the opposite sign
        other = order[(5 * (i + 1)) % p : (5 * (i + 1)) % p + 2]
        delta[other] = -np.sign(rng.standard_normal(2)) * rng.uniform(2.0, 3.0, size=2)
        shifts[attack] = delta
    return means, log_sd, shifts


def make_iomt_like(counts: Mapping[str, int] = BALANCED_COUNTS, seed: int = 0) -> FeatureTable:
    """Raw (unscaled) synthetic telemetry with raw text labels.

    ``counts`` maps class name to row count; unknown attack names reuse the
    signatures of the known ones cyclically. Rows are shuffled.
    """
    means, log_sd, shifts = _structure(seed)
    rng = np.random.default_rng([seed, 1])
    blocks, labels = [], []
    for i, (cls, n) in enumerate(counts.items()):
        z = rng.standard_normal((n, len(FEATURE_NAMES)))
        if cls != "Normal":
            z = z + shifts.get(cls, shifts[ATTACKS[i % len(ATTACKS)]])
        blocks.append(means * np.exp(log_sd * z))
        labels += [cls] * n
    values = np.vstack(blocks)
    perm = rng.permutation(values.shape[0])
    return FeatureTable(FEATURE_NAMES, values[perm], "Label", np.array(labels, dtype=object)[perm])


def write_synthetic_csv(
    path: str | Path,
    counts: Mapping[str, int] = BALANCED_COUNTS,
    seed: int = 0,
    artifacts: bool = True,
) -> Path:
    """Write :func:`make_iomt_like` output as CSV.

    With ``artifacts`` the file also carries the defects preprocessing must
    remove: two constant columns, a column with a missing cell, a column with
    an ``inf`` and a handful of exact duplicate rows.
    """
    table = make_iomt_like(counts, seed)
    path = Path(path)
    if not artifacts:
        write_csv(table, path)
        return path
    n = table.n_rows
    rng = np.random.default_rng([seed, 2])
    extra = np.column_stack([
        np.full(n, 7.0),
        np.zeros(n),
        rng.normal(size=n),
        rng.normal(size=n),
    ])
    extra[rng.integers(n), 2] = np.nan
    extra[rng.integers(n), 3] = np.inf
    names = table.column_names + ("const_a", "const_b", "gappy", "spiky")
    values = np.hstack([table.values, extra])
    dup = rng.choice(n, size=min(5, n), replace=False)
    values = np.vstack([values, values[dup]])
    labels = np.concatenate([table.labels, table.labels[dup]])
    full = FeatureTable(names, values, table.label_name, labels)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join([*full.column_names, full.label_name]) + "\n")
        for row, label in zip(full.values, full.labels):
            cells = ["" if np.isnan(v) else ("inf" if np.isinf(v) else repr(float(v))) for v in row]
            fh.write(",".join([*cells, str(label)]) + "\n")
    return path
