"""Diverse counterfactual search for black-box classifiers.

The search minimises, over a set of ``k`` candidate rows ``x'_1..x'_k``::

    sum_j ||x'_j - x||^2  +  lam * sum_j hinge_j  -  beta * diversity

with ``hinge_j = max(0, 0.5 + margin - P(target | x'_j))`` and diversity the
mean pairwise Euclidean distance between candidates. Diversity is rewarded
(subtracted), so the optimiser prefers counterfactuals that differ from each
other. The model is only queried through ``predict_proba``, so a genetic
algorithm is used instead of gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .models.base import as_matrix, positive_output
from .tabular import ScalerParams

SCHEMA_VERSION = 1
UNCHANGED = None


@dataclass
class CounterfactualQuery:
    instance: np.ndarray
    target: int = 0
    k: int = 3
    lam: float = 10.0
    beta: float = 1.0
    margin: float = 0.05
    immutable: tuple[str, ...] = ()
    population: int = 200
    generations: int = 100
    mutation_rate: float = 0.2
    mutation_scale: float = 0.1
    revert_rate: float = 0.05
    seed: int = 0
    allow_same_class: bool = False

    def __post_init__(self) -> None:
        self.instance = np.asarray(self.instance, dtype=np.float64).reshape(-1)
        if self.k < 1:
            raise PreconditionError("k must be >= 1")
        if self.lam < 0 or self.beta < 0:
            raise PreconditionError("lam and beta must be non-negative")
        if self.target not in (0, 1):
            raise PreconditionError("target must be 0 or 1")
        self.immutable = tuple(self.immutable)

    def echo(self) -> dict:
        return {
            "target": self.target,
            "k": self.k,
            "lambda": self.lam,
            "beta": self.beta,
            "margin": self.margin,
            "immutable": list(self.immutable),
            "population": self.population,
            "generations": self.generations,
            "mutation_rate": self.mutation_rate,
            "mutation_scale": self.mutation_scale,
            "seed": self.seed,
        }


@dataclass
class CounterfactualSet:
    feature_names: tuple[str, ...]
    original: np.ndarray
    original_prediction: int
    rows: np.ndarray
    predictions: np.ndarray
    target_proba: np.ndarray
    valid: np.ndarray
    proximity: np.ndarray
    sparsity: np.ndarray
    diversity: float
    objective: float
    query: dict = field(default_factory=dict)
    instance_id: int | str | None = None
    history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return int(self.rows.shape[0])

    def changed_features(self) -> list[set[str]]:
        return [
            {f for f, a, b in zip(self.feature_names, row, self.original) if a != b}
            for row in self.rows
        ]

    def to_dict(self, scaler: ScalerParams | None = None) -> dict:
        def show(v):
            v = scaler.inverse(v, self.feature_names) if scaler is not None else v
            return {f: float(x) for f, x in zip(self.feature_names, v)}

        return {
            "schema_version": SCHEMA_VERSION,
            "instance_id": self.instance_id,
            "original": {"features": show(self.original), "prediction": int(self.original_prediction)},
            "counterfactuals": [
                {
                    "features": show(row),
                    "prediction": int(self.predictions[j]),
                    "valid": bool(self.valid[j]),
                    "proximity": float(self.proximity[j]),
                    "sparsity": int(self.sparsity[j]),
                    "changed": sorted(self.changed_features()[j]),
                }
                for j, row in enumerate(self.rows)
            ],
            "diversity": float(self.diversity),
            "objective": float(self.objective),
            "query": dict(self.query),
        }


def diversity(rows: np.ndarray) -> float:
    """Mean pairwise Euclidean distance (0 for a single row)."""
    rows = np.asarray(rows, dtype=np.float64)
    k = rows.shape[0]
    if k < 2:
        return 0.0
    d = np.sqrt(((rows[:, None, :] - rows[None, :, :]) ** 2).sum(axis=2))
    return float(d[np.triu_indices(k, 1)].mean())


def _objective_parts(rows: np.ndarray, x: np.ndarray, p_target: np.ndarray, q: CounterfactualQuery):
    prox = ((rows - x) ** 2).sum(axis=-1)
    hinge = np.maximum(0.0, 0.5 + q.margin - p_target)
    return prox, hinge


def cf_objective(candidates, query: CounterfactualQuery, model) -> float:
    rows = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    p1 = positive_output(model)(rows)
    p_target = p1 if query.target == 1 else 1.0 - p1
    prox, hinge = _objective_parts(rows, query.instance, p_target, query)
    return float(prox.sum() + query.lam * hinge.sum() - query.beta * diversity(rows))


def _batch_objective(pop: np.ndarray, x: np.ndarray, p_target: np.ndarray, q: CounterfactualQuery) -> np.ndarray:
    """Objective for a population of shape ``(n, k, p)`` given target probabilities ``(n, k)``."""
    prox, hinge = _objective_parts(pop, x, p_target, q)
    k = pop.shape[1]
    if k > 1:
        d = np.sqrt(((pop[:, :, None, :] - pop[:, None, :, :]) ** 2).sum(axis=3))
        iu = np.triu_indices(k, 1)
        div = d[:, iu[0], iu[1]].mean(axis=1)
    else:
        div = np.zeros(pop.shape[0])
    return prox.sum(axis=1) + q.lam * hinge.sum(axis=1) - q.beta * div


def _pick_distinct(rows: np.ndarray, scores: np.ndarray, k: int, min_dist: float = 1e-6) -> list[int]:
    chosen: list[int] = []
    for i in np.argsort(scores, kind="stable"):
        if all(np.sqrt(((rows[i] - rows[j]) ** 2).sum()) >= min_dist for j in chosen):
            chosen.append(int(i))
        if len(chosen) == k:
            break
    return chosen


def generate_counterfactuals(model, query: CounterfactualQuery, instance_id=None) -> CounterfactualSet:
    """Genetic search for ``query.k`` diverse counterfactuals.

    Each individual is a whole set of ``k`` rows. Generation 0 holds one exact
    copy of the instance and noisy copies; each later generation keeps the
    elite individual, fills the rest by binary tournaments, uniform
    crossover and per-gene Gaussian mutation (plus occasional reversion to
    the original value), clips to ``[0, 1]`` and re-pins immutable features.
    Returned rows are the best ``k`` mutually distinct rows from the elite
    individual and, if it contains near-duplicates, from the final population.
    """
    names = tuple(getattr(model, "feature_names", None) or (f"x{j}" for j in range(query.instance.size)))
    x = as_matrix(query.instance, names)[0]
    p = x.size
    pinned = np.array([f in query.immutable for f in names])
    unknown = set(query.immutable) - set(names)
    if unknown:
        raise PreconditionError(f"immutable features not in the model: {sorted(unknown)}")
    if pinned.all():
        raise PreconditionError("no mutable features left to change")
    if query.generations < 1 or query.population < 2:
        raise PreconditionError("search budget must allow >= 1 generation and >= 2 individuals")
    f1 = positive_output(model)
    current = int(np.asarray(model.predict(x[None, :]))[0]) if hasattr(model, "predict") else int(f1(x[None, :])[0] > 0.5)
    if current == query.target and not query.allow_same_class:
        raise PreconditionError(
            f"instance is already predicted as class {query.target}; set allow_same_class to proceed"
        )

    rng = np.random.default_rng(int(query.seed))
    n, k = query.population, query.k
    free = ~pinned

    def repair(pop: np.ndarray) -> np.ndarray:
        pop = np.clip(pop, 0.0, 1.0)
        pop[..., pinned] = x[pinned]
        return pop

    def score(pop: np.ndarray) -> np.ndarray:
        p1 = f1(pop.reshape(-1, p)).reshape(n, k)
        pt = p1 if query.target == 1 else 1.0 - p1
        return _batch_objective(pop, x, pt, query)

    pop = np.broadcast_to(x, (n, k, p)).copy()
    noise_mask = rng.random((n, k, p)) < query.mutation_rate
    pop = pop + noise_mask * rng.normal(0.0, query.mutation_scale, size=(n, k, p)) * free
    pop[0] = x
    pop = repair(pop)
    fit = score(pop)
    history = [float(fit.min())]

    for _ in range(query.generations):
        elite = int(np.argmin(fit))
        a = rng.integers(n, size=(n - 1, 2))
        parents1 = np.where(fit[a[:, 0]] <= fit[a[:, 1]], a[:, 0], a[:, 1])
        b = rng.integers(n, size=(n - 1, 2))
        parents2 = np.where(fit[b[:, 0]] <= fit[b[:, 1]], b[:, 0], b[:, 1])
        take = rng.random((n - 1, k, p)) < 0.5
        child = np.where(take, pop[parents1], pop[parents2])
        mutate = rng.random((n - 1, k, p)) < query.mutation_rate
        child = child + mutate * rng.normal(0.0, query.mutation_scale, size=(n - 1, k, p))
        revert = rng.random((n - 1, k, p)) < query.revert_rate
        child = np.where(revert, x, child)
        pop = np.concatenate([pop[elite][None], repair(child)])
        fit = score(pop)
        history.append(float(fit.min()))

    best = pop[int(np.argmin(fit))]
    best_p1 = f1(best)
    best_pt = best_p1 if query.target == 1 else 1.0 - best_p1
    prox, hinge = _objective_parts(best, x, best_pt, query)
    chosen = _pick_distinct(best, prox + query.lam * hinge, k)
    rows = [best[i] for i in chosen]
    if len(rows) < k:
        flat = pop.reshape(-1, p)
        fp1 = f1(flat)
        fpt = fp1 if query.target == 1 else 1.0 - fp1
        fprox, fhinge = _objective_parts(flat, x, fpt, query)
        order = np.argsort(fprox + query.lam * fhinge, kind="stable")
        for i in order:
            if all(np.sqrt(((flat[i] - r) ** 2).sum()) >= 1e-6 for r in rows):
                rows.append(flat[i])
            if len(rows) == k:
                break
    rows = np.array(rows)
    return _summarise(model, names, x, current, rows, query, instance_id, history)


def _summarise(model, names, x, current, rows, query, instance_id, history) -> CounterfactualSet:
    preds = np.asarray(model.predict(rows), dtype=np.int64)
    p1 = positive_output(model)(rows)
    pt = p1 if query.target == 1 else 1.0 - p1
    return CounterfactualSet(
        feature_names=names,
        original=x.copy(),
        original_prediction=current,
        rows=rows,
        predictions=preds,
        target_proba=pt,
        valid=preds == query.target,
        proximity=((rows - x) ** 2).sum(axis=1),
        sparsity=(rows != x).sum(axis=1),
        diversity=diversity(rows),
        objective=cf_objective(rows, query, model),
        query=query.echo(),
        instance_id=instance_id,
        history=history,
    )


@dataclass
class CounterfactualDiff:
    """Original row plus one row per counterfactual; unchanged cells are ``None``."""

    columns: tuple[str, ...]
    original: dict[str, float]
    original_prediction: int
    rows: list[dict[str, float | None]]
    predictions: list[int]

    def changed_counts(self) -> list[int]:
        return [sum(v is not UNCHANGED for v in row.values()) for row in self.rows]

    def to_text(self, float_fmt: str = "{:.4g}") -> str:
        header = ["", *self.columns, "prediction"]
        body = [["original", *(float_fmt.format(self.original[c]) for c in self.columns), str(self.original_prediction)]]
        for j, (row, pred) in enumerate(zip(self.rows, self.predictions)):
            cells = ["-" if row[c] is UNCHANGED else float_fmt.format(row[c]) for c in self.columns]
            body.append([f"cf{j + 1}", *cells, str(pred)])
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in [header, *body]]
        return "\n".join(lines) + "\n"


def cf_report(cfs: CounterfactualSet, scaler: ScalerParams | None = None) -> CounterfactualDiff:
    """Tabulate counterfactuals against the original, unscaled for display.

    A cell counts as changed when the scaled value differs at all, so the
    number of changed cells per row equals that row's sparsity.
    """
    names = cfs.feature_names

    def show(v: np.ndarray) -> np.ndarray:
        return scaler.inverse(v, names) if scaler is not None else v

    orig = show(cfs.original)
    rows = []
    for row in cfs.rows:
        shown = show(row)
        rows.append({
            f: (UNCHANGED if row[j] == cfs.original[j] else float(shown[j]))
            for j, f in enumerate(names)
        })
    return CounterfactualDiff(
        columns=names,
        original={f: float(v) for f, v in zip(names, orig)},
        original_prediction=int(cfs.original_prediction),
        rows=rows,
        predictions=[int(v) for v in cfs.predictions],
    )
