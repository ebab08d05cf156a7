"""Local linear surrogate explanations.

Around one instance, draw Gaussian perturbations from per-feature training
statistics, weight them by ``exp(-d^2 / sigma^2)`` (``d`` Euclidean on scaled
features), then fit a sparse weighted ridge model to the black box's
probability for the predicted class. Sparsity is a hard cap of ``K``
features chosen by greedy forward selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, PreconditionError
from .models.base import as_matrix, positive_output
from .tabular import FeatureTable, ScalerParams

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class TrainStats:
    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_table(cls, table: FeatureTable) -> "TrainStats":
        if table.n_rows < 2:
            raise PreconditionError("need at least two rows for training statistics")
        return cls(table.column_names, table.values.mean(axis=0), table.values.std(axis=0, ddof=1))


@dataclass
class LimeConfig:
    n_perturbations: int = 5000
    n_features: int = 10
    kernel_width: float | None = None  # None -> 0.75 * sqrt(p)
    ridge: float = 1e-3
    seed: int = 0


@dataclass
class SurrogateExplanation:
    feature_names: tuple[str, ...]
    intercept: float
    weights: dict[str, float]
    kernel_width: float
    n_perturbations: int
    local_fidelity: float
    predicted_class: int
    predicted_proba: float = math.nan
    surrogate_at_instance: float = math.nan
    ridge: float = 0.0
    seed: int | None = None
    instance_id: int | str | None = None
    instance_values: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "instance_id": self.instance_id,
            "intercept": self.intercept,
            "weights": [
                {"feature": f, "weight": w, "instance_value": self.instance_values.get(f)}
                for f, w in self.weights.items()
            ],
            "fidelity": self.local_fidelity,
            "kernel_width": self.kernel_width,
            "n": self.n_perturbations,
            "seed": self.seed,
            "ridge": self.ridge,
            "predicted_class": self.predicted_class,
            "predicted_proba": self.predicted_proba,
            "surrogate_at_instance": self.surrogate_at_instance,
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateExplanation":
        return cls(
            feature_names=tuple(d.get("feature_names", [w["feature"] for w in d["weights"]])),
            intercept=d["intercept"],
            weights={w["feature"]: w["weight"] for w in d["weights"]},
            kernel_width=d["kernel_width"],
            n_perturbations=d["n"],
            local_fidelity=d["fidelity"],
            predicted_class=d["predicted_class"],
            predicted_proba=d.get("predicted_proba", math.nan),
            surrogate_at_instance=d.get("surrogate_at_instance", math.nan),
            ridge=d.get("ridge", 0.0),
            seed=d.get("seed"),
            instance_id=d.get("instance_id"),
            instance_values={w["feature"]: w["instance_value"] for w in d["weights"]
                             if w.get("instance_value") is not None},
        )


def default_kernel_width(p: int) -> float:
    return 0.75 * math.sqrt(p)


def proximity_weights(instance: np.ndarray, Z: np.ndarray, kernel_width: float) -> np.ndarray:
    d2 = ((Z - instance) ** 2).sum(axis=1)
    return np.exp(-d2 / kernel_width**2)


def perturb(
    instance,
    stats: TrainStats,
    n: int = 5000,
    seed: int = 0,
    kernel_width: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian perturbations around ``instance`` and their proximity weights.

    Row 0 is the instance itself (weight 1).
    """
    if n < 10:
        raise PreconditionError("need at least 10 perturbations")
    x = as_matrix(instance, stats.feature_names)[0]
    zero = [f for f, s in zip(stats.feature_names, stats.std) if not s > 0]
    if zero:
        raise PreconditionError(f"zero standard deviation for features {zero}")
    sigma = kernel_width if kernel_width is not None else default_kernel_width(x.shape[0])
    rng = np.random.default_rng(int(seed))
    Z = stats.mean + stats.std * rng.standard_normal((n, x.shape[0]))
    Z[0] = x
    return Z, proximity_weights(x, Z, sigma)


def _weighted_ridge(X: np.ndarray, y: np.ndarray, w: np.ndarray, ridge: float) -> tuple[np.ndarray, float, float]:
    """Weighted ridge with unpenalised intercept; returns ``(coef, intercept, ridge_used)``.

    The penalty grows by factors of ten (up to 0.1) while the normal
    equations are numerically singular.
    """
    sw = w.sum()
    xm = (w @ X) / sw
    ym = float(w @ y) / sw
    Xc = X - xm
    yc = y - ym
    A = (Xc * w[:, None]).T @ Xc
    rhs = (Xc * w[:, None]).T @ yc
    lam = ridge
    while True:
        M = A + lam * np.eye(A.shape[0])
        if A.shape[0] == 0:
            return np.zeros(0), ym, lam
        if np.linalg.cond(M) < 1e12:
            coef = np.linalg.solve(M, rhs)
            return coef, ym - float(xm @ coef), lam
        if lam >= 1e-1:
            raise DataError("surrogate normal equations stay singular even with ridge 0.1")
        lam = 1e-1 if lam <= 0 else min(lam * 10.0, 1e-1)


def _wsse(X, y, w, coef, intercept) -> float:
    r = y - (X @ coef + intercept)
    return float(w @ (r * r))


def fit_surrogate(
    Z: np.ndarray,
    weights: np.ndarray,
    model,
    n_features: int = 10,
    ridge: float = 1e-3,
    target_class: int | None = None,
    feature_names=None,
    kernel_width: float = math.nan,
) -> SurrogateExplanation:
    """Fit the sparse weighted-ridge surrogate on perturbations ``Z``.

    Targets are the model's probability of ``target_class`` (by default the
    class predicted at ``Z[0]``). Features are added one at a time, each time
    picking the one that most lowers the weighted squared error of the
    refitted model; ties go to the lower feature index.
    """
    Z = np.asarray(Z, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    n, p = Z.shape
    if n <= n_features:
        raise PreconditionError(f"need more perturbations ({n}) than surrogate features ({n_features})")
    if n_features < 1:
        raise PreconditionError("n_features must be >= 1")
    names = tuple(feature_names) if feature_names is not None else tuple(
        getattr(model, "feature_names", None) or (f"x{j}" for j in range(p))
    )
    p1 = positive_output(model)(Z)
    if target_class is None:
        target_class = int(p1[0] > 0.5)
    y = p1 if target_class == 1 else 1.0 - p1

    selected: list[int] = []
    remaining = list(range(p))
    lam = ridge
    for _ in range(min(n_features, p)):
        best = None
        for j in remaining:
            cols = selected + [j]
            coef, icpt, _ = _weighted_ridge(Z[:, cols], y, weights, ridge)
            err = _wsse(Z[:, cols], y, weights, coef, icpt)
            if best is None or err < best[0]:
                best = (err, j)
        selected.append(best[1])
        remaining.remove(best[1])
    selected.sort()
    coef, icpt, lam = _weighted_ridge(Z[:, selected], y, weights, ridge)

    fitted = Z[:, selected] @ coef + icpt
    ss_res = float(weights @ (y - fitted) ** 2)
    ym = float(weights @ y) / weights.sum()
    ss_tot = float(weights @ (y - ym) ** 2)
    if ss_tot > 0:
        fidelity = 1.0 - ss_res / ss_tot
    else:
        fidelity = 1.0 if ss_res <= 1e-24 else -math.inf
    return SurrogateExplanation(
        feature_names=names,
        intercept=float(icpt),
        weights={names[j]: float(c) for j, c in zip(selected, coef)},
        kernel_width=float(kernel_width),
        n_perturbations=n,
        local_fidelity=float(fidelity),
        predicted_class=int(target_class),
        predicted_proba=float(y[0]),
        surrogate_at_instance=float(fitted[0]),
        ridge=float(lam),
    )


def explain_lime(
    model,
    instance,
    stats: TrainStats,
    config: LimeConfig = LimeConfig(),
    scaler: ScalerParams | None = None,
    instance_id=None,
) -> SurrogateExplanation:
    """Perturb, weight and fit; report instance values unscaled when a scaler is given."""
    x = as_matrix(instance, stats.feature_names)[0]
    sigma = config.kernel_width if config.kernel_width is not None else default_kernel_width(x.shape[0])
    Z, w = perturb(x, stats, config.n_perturbations, config.seed, sigma)
    target = int(np.asarray(model.predict(x[None, :]))[0]) if hasattr(model, "predict") else None
    expl = fit_surrogate(
        Z, w, model, config.n_features, config.ridge, target_class=target,
        feature_names=stats.feature_names, kernel_width=sigma,
    )
    shown = scaler.inverse(x, stats.feature_names) if scaler is not None else x
    expl.instance_values = {n: float(v) for n, v in zip(stats.feature_names, shown)}
    expl.seed = config.seed
    expl.instance_id = instance_id
    return expl


def surrogate_predict(expl: SurrogateExplanation, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    idx = [expl.feature_names.index(f) for f in expl.weights]
    return X[:, idx] @ np.array(list(expl.weights.values())) + expl.intercept
