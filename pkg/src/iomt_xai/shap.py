"""Shapley-value attributions for a single prediction.

The explained quantity is the model's probability of class 1. Features
outside a coalition take their values from background rows (interventional
value function), so for a coalition ``S``::

    v(S) = mean_b f(x_S, b_rest)

``shap_exact`` enumerates all ``2**p`` coalitions; ``shap_sampled`` averages
marginal contributions over random feature orderings and memoises ``v`` per
coalition, which makes it cheap whenever coalitions repeat (small ``p``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import PreconditionError
from .models.base import as_matrix, positive_output
from .tabular import FeatureTable

SCHEMA_VERSION = 1
EXACT_MAX_FEATURES = 15
_ROW_BUDGET = 1 << 16


@dataclass
class Attribution:
    feature_names: tuple[str, ...]
    instance: np.ndarray
    base_value: float
    phi: np.ndarray
    prediction: float
    method: str
    n_samples: int
    std_errors: np.ndarray | None = None
    efficiency_adjusted: bool = False
    instance_id: int | str | None = None
    display_values: np.ndarray | None = None

    @property
    def phi_map(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.feature_names, self.phi)}

    @property
    def efficiency_gap(self) -> float:
        return float(self.base_value + self.phi.sum() - self.prediction)

    def to_dict(self) -> dict:
        values = self.display_values if self.display_values is not None else self.instance
        rows = []
        for j, name in enumerate(self.feature_names):
            row = {"feature": name, "value": float(values[j]), "phi": float(self.phi[j])}
            if self.std_errors is not None:
                row["std_error"] = float(self.std_errors[j])
            rows.append(row)
        return {
            "schema_version": SCHEMA_VERSION,
            "instance_id": self.instance_id,
            "base_value": float(self.base_value),
            "prediction": float(self.prediction),
            "method": self.method,
            "n_samples": int(self.n_samples),
            "efficiency_adjusted": self.efficiency_adjusted,
            "phi": rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Attribution":
        rows = d["phi"]
        se = [r["std_error"] for r in rows] if rows and "std_error" in rows[0] else None
        values = np.array([r["value"] for r in rows], dtype=np.float64)
        return cls(
            feature_names=tuple(r["feature"] for r in rows),
            instance=values,
            base_value=d["base_value"],
            phi=np.array([r["phi"] for r in rows], dtype=np.float64),
            prediction=d["prediction"],
            method=d["method"],
            n_samples=d["n_samples"],
            std_errors=None if se is None else np.array(se),
            efficiency_adjusted=d.get("efficiency_adjusted", False),
            instance_id=d.get("instance_id"),
            display_values=values,
        )


def _feature_names(model, p: int) -> tuple[str, ...]:
    names = getattr(model, "feature_names", None)
    return tuple(names) if names is not None else tuple(f"x{j}" for j in range(p))


def _prepare(model, instance, background):
    names = getattr(model, "feature_names", None)
    x = as_matrix(instance, names)[0]
    B = as_matrix(background, names)
    if B.shape[0] < 1:
        raise PreconditionError("background set is empty")
    if B.shape[1] != x.shape[0]:
        raise PreconditionError("background and instance have different feature counts")
    return positive_output(model), x, B


def _coalition_values(f, x: np.ndarray, B: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """``v(S)`` for every row of the boolean ``masks`` matrix."""
    nb, p = B.shape
    out = np.empty(masks.shape[0])
    full = masks.all(axis=1)
    if full.any():
        out[full] = f(x[None, :])[0]
    rest = np.flatnonzero(~full)
    step = max(1, _ROW_BUDGET // nb)
    for start in range(0, rest.size, step):
        sel = rest[start : start + step]
        hybrid = np.where(masks[sel][:, None, :], x[None, None, :], B[None, :, :])
        out[sel] = f(hybrid.reshape(-1, p)).reshape(sel.size, nb).mean(axis=1)
    return out


def value_function(model, instance, subset: Iterable, background) -> float:
    """Mean model probability over background rows with ``subset`` taken from ``instance``.

    ``subset`` holds feature indices or feature names.
    """
    f, x, B = _prepare(model, instance, background)
    names = _feature_names(model, x.shape[0])
    mask = np.zeros(x.shape[0], dtype=bool)
    for s in subset:
        j = names.index(s) if isinstance(s, str) else int(s)
        if not 0 <= j < x.shape[0]:
            raise PreconditionError(f"feature index {j} out of range")
        mask[j] = True
    return float(_coalition_values(f, x, B, mask[None, :])[0])


def shapley_weights(p: int) -> np.ndarray:
    """``w[s] = s! (p - s - 1)! / p!`` for coalition sizes ``s = 0..p-1``."""
    return np.array([math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)])


def shap_exact(
    model,
    instance,
    background,
    max_features: int = EXACT_MAX_FEATURES,
    instance_id=None,
) -> Attribution:
    """Exact Shapley values by enumerating every coalition (``2**p * B`` model rows)."""
    f, x, B = _prepare(model, instance, background)
    p = x.shape[0]
    if p > max_features:
        raise PreconditionError(
            f"{p} features exceed the exact-enumeration cap of {max_features}; use shap_sampled"
        )
    codes = np.arange(1 << p)
    masks = ((codes[:, None] >> np.arange(p)) & 1).astype(bool)
    v = _coalition_values(f, x, B, masks)
    sizes = masks.sum(axis=1)
    w = shapley_weights(p)
    phi = np.empty(p)
    for i in range(p):
        without = codes[~masks[:, i]]
        phi[i] = np.sum(w[sizes[without]] * (v[without | (1 << i)] - v[without]))
    return Attribution(
        feature_names=_feature_names(model, p),
        instance=x.copy(),
        base_value=float(v[0]),
        phi=phi,
        prediction=float(v[-1]),
        method="exact",
        n_samples=1 << p,
        instance_id=instance_id,
    )


def shap_sampled(
    model,
    instance,
    background,
    n_permutations: int = 1000,
    seed: int = 0,
    adjust_efficiency: bool = True,
    instance_id=None,
    chunk: int = 64,
) -> Attribution:
    """Permutation-sampling Shapley estimate with per-feature standard errors.

    Each random ordering contributes one marginal ``v(S + i) - v(S)`` per
    feature, where ``S`` holds the features preceding ``i``. If
    ``adjust_efficiency`` is set, the (tiny) gap between ``base + sum(phi)`` and
    the prediction is spread over features in proportion to their standard
    errors and ``efficiency_adjusted`` is flagged.
    """
    if n_permutations < 1:
        raise PreconditionError("n_permutations must be >= 1")
    f, x, B = _prepare(model, instance, background)
    p = x.shape[0]
    rng = np.random.default_rng(int(seed))
    cache: dict[bytes, float] = {}
    marginals = np.empty((n_permutations, p))
    for start in range(0, n_permutations, chunk):
        m = min(chunk, n_permutations - start)
        perms = np.array([rng.permutation(p) for _ in range(m)])
        # chain[r, j] = mask of the first j features of permutation r
        chain = np.zeros((m, p + 1, p), dtype=bool)
        for j in range(p):
            chain[:, j + 1] = chain[:, j]
            chain[np.arange(m), j + 1, perms[:, j]] = True
        flat = chain.reshape(-1, p)
        keys = [row.tobytes() for row in np.packbits(flat, axis=1)]
        todo = {}
        for k, key in enumerate(keys):
            if key not in cache and key not in todo:
                todo[key] = k
        if todo:
            vals = _coalition_values(f, x, B, flat[list(todo.values())])
            cache.update(zip(todo.keys(), vals.tolist()))
        v = np.array([cache[key] for key in keys]).reshape(m, p + 1)
        diffs = np.diff(v, axis=1)
        block = np.empty((m, p))
        block[np.arange(m)[:, None], perms] = diffs
        marginals[start : start + m] = block

    empty_key = np.packbits(np.zeros((1, p), dtype=bool), axis=1)[0].tobytes()
    full_key = np.packbits(np.ones((1, p), dtype=bool), axis=1)[0].tobytes()
    base, pred = cache[empty_key], cache[full_key]
    phi = marginals.mean(axis=0)
    if n_permutations > 1:
        se = marginals.std(axis=0, ddof=1) / math.sqrt(n_permutations)
    else:
        se = np.zeros(p)
    if adjust_efficiency:
        gap = (pred - base) - phi.sum()
        share = se / se.sum() if se.sum() > 0 else np.full(p, 1.0 / p)
        phi = phi + gap * share
    return Attribution(
        feature_names=_feature_names(model, p),
        instance=x.copy(),
        base_value=float(base),
        phi=phi,
        prediction=float(pred),
        method="sampled",
        n_samples=n_permutations,
        std_errors=se,
        efficiency_adjusted=adjust_efficiency,
        instance_id=instance_id,
    )


def select_background(table: FeatureTable, size: int = 200, seed: int = 0, balanced: bool = False) -> FeatureTable:
    """Uniform row subsample of ``table`` (all rows if it is small enough).

    With ``balanced`` the sample takes equally many rows of each binary class.
    """
    if table.n_rows == 0:
        raise PreconditionError("cannot draw a background from an empty table")
    rng = np.random.default_rng(int(seed))
    if balanced:
        if table.binary is None:
            raise PreconditionError("balanced background needs binary labels")
        groups = [np.flatnonzero(table.binary == c) for c in (0, 1)]
        per = min(size // 2, *(g.size for g in groups))
        idx = np.concatenate([rng.choice(g, size=per, replace=False) for g in groups])
    elif table.n_rows <= size:
        return table
    else:
        idx = rng.choice(table.n_rows, size=size, replace=False)
    return table.take(np.sort(idx))


# --------------------------------------------------------------------------
# force plot


@dataclass(frozen=True)
class ForceBar:
    feature: str
    value: float
    phi: float
    direction: int
    start: float
    end: float


def force_plot_data(attr: Attribution) -> list[ForceBar]:
    """Bars sorted by ``|phi|`` (descending) walking from base value to prediction.

    Zero contributions are omitted. ``value`` is the display value of the
    feature at the instance (unscaled when available).
    """
    values = attr.display_values if attr.display_values is not None else attr.instance
    order = sorted(
        (j for j in range(len(attr.phi)) if attr.phi[j] != 0.0),
        key=lambda j: (-abs(attr.phi[j]), attr.feature_names[j]),
    )
    bars = []
    level = float(attr.base_value)
    for j in order:
        phi = float(attr.phi[j])
        bars.append(ForceBar(attr.feature_names[j], float(values[j]), phi, 1 if phi > 0 else -1, level, level + phi))
        level += phi
    return bars


def force_plot_svg(attr: Attribution, width: int = 800, bar_height: int = 18, max_bars: int | None = None) -> str:
    """Plain SVG force plot: one horizontal bar per feature, chained left to right.

    Positive contributions are red, negative blue. Every bar carries
    ``data-start``/``data-end`` (cumulative output values) and the root carries
    ``data-base-value``/``data-prediction`` for machine checking.
    """
    bars = force_plot_data(attr)
    shown = bars if max_bars is None else bars[:max_bars]
    levels = [attr.base_value, attr.prediction] + [b.end for b in bars]
    lo, hi = min(levels), max(levels)
    span = hi - lo or 1.0
    margin = 160
    scale = (width - 2 * margin) / span

    def px(v: float) -> float:
        return margin + (v - lo) * scale

    height = (len(shown) + 3) * (bar_height + 4)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'data-base-value="{attr.base_value!r}" data-prediction="{attr.prediction!r}">',
        f'<text x="{px(attr.base_value):.2f}" y="14" font-size="12">base value {attr.base_value:.4f}</text>',
    ]
    for k, bar in enumerate(shown):
        y = (k + 1) * (bar_height + 4)
        x0, x1 = sorted((px(bar.start), px(bar.end)))
        colour = "#ff0051" if bar.direction > 0 else "#008bfb"
        parts.append(
            f'<rect x="{x0:.2f}" y="{y}" width="{max(x1 - x0, 0.5):.2f}" height="{bar_height}" fill="{colour}" '
            f'data-feature="{_xml_escape(bar.feature)}" data-value="{bar.value!r}" data-phi="{bar.phi!r}" '
            f'data-start="{bar.start!r}" data-end="{bar.end!r}"/>'
        )
        parts.append(
            f'<text x="{max(x1, x0) + 4:.2f}" y="{y + bar_height - 4}" font-size="11">'
            f"{_xml_escape(bar.feature)} = {bar.value:.4g}</text>"
        )
    y = (len(shown) + 2) * (bar_height + 4)
    parts.append(f'<text x="{px(attr.prediction):.2f}" y="{y}" font-size="12">f(x) = {attr.prediction:.4f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _xml_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
