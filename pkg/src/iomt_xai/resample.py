"""SMOTE oversampling and per-class random sampling.

The balanced design used throughout is: upsample every class whose target
exceeds its current count with SMOTE, then draw exactly ``target`` rows of
each class uniformly without replacement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DataError, PreconditionError
from .tabular import FeatureTable, class_counts, concat_rows

__all__ = [
    "ResamplePlan",
    "SyntheticProvenance",
    "smote_upsample",
    "stratified_sample",
    "apply_plan",
    "class_counts",
    "reference_plan",
]


@dataclass(frozen=True)
class ResamplePlan:
    targets: Mapping[str, int]
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise PreconditionError("k_neighbors must be >= 1")
        bad = {c: t for c, t in self.targets.items() if int(t) < 1}
        if bad:
            raise PreconditionError(f"plan targets must be positive: {bad}")
        if not 0 <= int(self.seed) < 2**64:
            raise PreconditionError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "targets", {str(k): int(v) for k, v in self.targets.items()})

    def to_dict(self) -> dict:
        return {"targets": dict(self.targets), "k_neighbors": self.k_neighbors, "seed": int(self.seed)}


def reference_plan(seed: int = 0, k_neighbors: int = 5) -> ResamplePlan:
    """2000 normal rows and 500 rows of each of the four attack classes."""
    return ResamplePlan(
        {"Normal": 2000, "DDoS": 500, "MitM": 500, "Ransomware": 500, "Buffer_Overflow": 500},
        k_neighbors=k_neighbors,
        seed=seed,
    )


@dataclass
class SyntheticProvenance:
    """Where each synthetic row came from.

    Entry ``j`` describes synthetic row ``j``: it equals
    ``x[source] + u * (x[neighbor] - x[source])`` with row indices referring
    to the table passed to :func:`smote_upsample`.
    """

    source: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    neighbor: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    class_name: str | None = None
    k_used: int | None = None
    k_clipped: bool = False

    def __len__(self) -> int:
        return int(self.source.shape[0])


def _nearest_same_class(x: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Indices (into ``x``) of the ``k`` nearest other rows, ties to lower index."""
    m = x.shape[0]
    out = np.empty((m, k), dtype=np.int64)
    for start in range(0, m, chunk):
        block = x[start : start + chunk]
        d2 = ((block[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
        rows = np.arange(block.shape[0])
        d2[rows, start + rows] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")
        out[start : start + chunk] = order[:, :k]
    return out


def smote_upsample(
    table: FeatureTable,
    class_name: str,
    target: int,
    k: int = 5,
    seed: int = 0,
) -> tuple[FeatureTable, SyntheticProvenance]:
    """Grow ``class_name`` to ``target`` rows by SMOTE interpolation.

    Synthetic row ``j`` uses its own generator seeded by ``(seed, j)``: it picks
    a source row of the class uniformly, one of the source's ``k`` nearest
    same-class neighbours uniformly, and ``u ~ U[0, 1]``. Synthetic rows are
    appended after the original rows, which are left untouched.
    """
    members = np.flatnonzero(table.labels == class_name)
    m = members.size
    if m < 2:
        raise DataError(f"SMOTE needs >=2 minority samples; class {class_name!r} has {m}")
    if target < m:
        raise PreconditionError(f"target {target} is below the current count {m} of {class_name!r}")
    if k < 1:
        raise PreconditionError("k must be >= 1")
    n_new = target - m
    k_used = min(k, m - 1)
    prov = SyntheticProvenance(class_name=class_name, k_used=k_used, k_clipped=k_used < k)
    if n_new == 0:
        return table, prov

    x = table.values[members]
    neighbors = _nearest_same_class(x, k_used)
    src = np.empty(n_new, dtype=np.int64)
    nbr = np.empty(n_new, dtype=np.int64)
    u = np.empty(n_new)
    for j in range(n_new):
        rng = np.random.default_rng([int(seed), j])
        s = int(rng.integers(m))
        src[j] = s
        nbr[j] = neighbors[s, int(rng.integers(k_used))]
        u[j] = rng.random()
    base = x[src]
    synth = base + u[:, None] * (x[nbr] - base)

    prov.source = members[src]
    prov.neighbor = members[nbr]
    prov.u = u
    extra = FeatureTable(
        table.column_names,
        synth,
        table.label_name,
        np.array([class_name] * n_new, dtype=object),
        None if table.binary is None else np.full(n_new, table.binary[members[0]]),
    )
    return concat_rows(table, extra), prov


def stratified_sample(table: FeatureTable, plan: ResamplePlan) -> FeatureTable:
    """Keep exactly ``plan.targets[c]`` uniformly chosen rows of every class ``c``.

    Survivors keep their original relative order.
    """
    counts = class_counts(table)
    missing = sorted(set(counts) - set(plan.targets))
    if missing:
        raise PreconditionError(f"plan has no target for classes: {missing}")
    rng = np.random.default_rng(int(plan.seed))
    keep = []
    for cls in sorted(plan.targets):
        target = plan.targets[cls]
        available = counts.get(cls, 0)
        if target > available:
            raise PreconditionError(
                f"class {cls!r}: target {target} exceeds the {available} available rows"
            )
        rows = np.flatnonzero(table.labels == cls)
        keep.append(rng.choice(rows, size=target, replace=False))
    idx = np.sort(np.concatenate(keep)) if keep else np.zeros(0, dtype=np.int64)
    return table.take(idx)


def apply_plan(
    table: FeatureTable, plan: ResamplePlan, smote: bool = True
) -> tuple[FeatureTable, dict[str, SyntheticProvenance]]:
    """SMOTE every under-target class, then sample every class to its target.

    Classes are upsampled in sorted order, each with a seed derived from
    ``plan.seed`` and the class position so the result is deterministic.
    """
    provenance: dict[str, SyntheticProvenance] = {}
    counts = class_counts(table)
    if smote:
        for i, cls in enumerate(sorted(plan.targets)):
            have = counts.get(cls, 0)
            if plan.targets[cls] > have:
                seed = int(np.random.SeedSequence([int(plan.seed), i]).generate_state(1, np.uint64)[0])
                table, provenance[cls] = smote_upsample(
                    table, cls, plan.targets[cls], plan.k_neighbors, seed
                )
    return stratified_sample(table, plan), provenance
