"""Agreement scores between Shapley, surrogate and counterfactual explanations of one instance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .dice import CounterfactualSet
from .errors import PreconditionError
from .lime import SurrogateExplanation
from .shap import Attribution

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Thresholds:
    spearman: float = 0.5
    jaccard: float = 0.4
    cf_alignment: float = 0.5


@dataclass
class ConsensusReport:
    instance_id: int | str | None
    k: int
    spearman_shap_lime: float | None
    topk_jaccard: float | None
    sign_agreement: float | None
    cf_alignment: float | None
    cf_alignment_by_convention: bool
    verdict: str
    thresholds: Thresholds
    n_shared_features: int

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "instance_id": self.instance_id,
            "k": self.k,
            "spearman_shap_lime": self.spearman_shap_lime,
            "topk_jaccard": self.topk_jaccard,
            "sign_agreement": self.sign_agreement,
            "cf_alignment": self.cf_alignment,
            "cf_alignment_by_convention": self.cf_alignment_by_convention,
            "n_shared_features": self.n_shared_features,
            "verdict": self.verdict,
            "thresholds": {
                "spearman": self.thresholds.spearman,
                "jaccard": self.thresholds.jaccard,
                "cf_alignment": self.thresholds.cf_alignment,
            },
        }


def _check_ids(*items) -> None:
    ids = {repr(getattr(it, "instance_id", None)) for it in items if it is not None}
    if len(ids) > 1:
        raise PreconditionError(f"explanations refer to different instances: {sorted(ids)}")


def top_k(scores: dict[str, float], k: int) -> set[str]:
    """The ``k`` names with the largest ``|score|``; ties broken by name."""
    ranked = sorted(scores, key=lambda f: (-abs(scores[f]), f))
    return set(ranked[:k])


def spearman(a: np.ndarray, b: np.ndarray) -> float | None:
    """Spearman correlation with average ranks for ties; ``None`` if undefined."""
    if a.size < 2:
        return None
    ra, rb = rankdata(a), rankdata(b)
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0:
        return None
    return float(np.clip((da @ db) / denom, -1.0, 1.0))


def rank_agreement(
    attr: Attribution, surr: SurrogateExplanation, k: int = 5
) -> tuple[float | None, float, float | None]:
    """``(spearman, jaccard, sign_agreement)`` between Shapley and surrogate weights.

    Spearman compares magnitude ranks over the features both explanations
    score. Jaccard compares the top-``k`` sets by magnitude. Sign agreement
    is the fraction of features in both top-``k`` sets whose signs match;
    ``None`` when that intersection is empty.
    """
    _check_ids(attr, surr)
    if k < 1:
        raise PreconditionError("k must be >= 1")
    phi = attr.phi_map
    w = dict(surr.weights)
    shared = sorted(set(phi) & set(w))
    rho = spearman(np.abs([phi[f] for f in shared]), np.abs([w[f] for f in shared]))
    top_phi, top_w = top_k(phi, k), top_k(w, k)
    union = top_phi | top_w
    jaccard = len(top_phi & top_w) / len(union) if union else 1.0
    both = top_phi & top_w
    sign = None
    if both:
        sign = sum(np.sign(phi[f]) == np.sign(w[f]) for f in both) / len(both)
    return rho, float(jaccard), None if sign is None else float(sign)


def cf_feature_alignment(
    cfs: CounterfactualSet,
    attr: Attribution | None,
    surr: SurrogateExplanation | None,
    k: int = 5,
) -> tuple[float, bool]:
    """Share of counterfactual-changed features among the Shapley/surrogate top-``k``.

    Returns ``(alignment, by_convention)``; a set that changes nothing scores
    1.0 with ``by_convention`` set. Either attribution may be ``None``, in
    which case only the other one's top-``k`` counts.
    """
    _check_ids(cfs, attr, surr)
    if attr is None and surr is None:
        raise PreconditionError("need a Shapley attribution or a surrogate to align against")
    changed = set().union(*cfs.changed_features()) if cfs.k else set()
    if not changed:
        return 1.0, True
    important: set[str] = set()
    if attr is not None:
        important |= top_k(attr.phi_map, k)
    if surr is not None:
        important |= top_k(dict(surr.weights), k)
    return len(changed & important) / len(changed), False


def verdict(rho: float | None, jaccard: float | None, alignment: float | None, t: Thresholds) -> str:
    """Pure function of the scores; a missing score never satisfies its threshold."""
    checks = [
        rho is not None and rho >= t.spearman,
        jaccard is not None and jaccard >= t.jaccard,
        alignment is not None and alignment >= t.cf_alignment,
    ]
    if all(checks):
        return "consistent"
    if any(checks):
        return "partial"
    return "inconsistent"


def build_consensus(
    attr: Attribution | None,
    surr: SurrogateExplanation | None,
    cfs: CounterfactualSet | None = None,
    thresholds: Thresholds = Thresholds(),
    k: int = 5,
) -> ConsensusReport:
    """Score every available channel and classify the instance.

    Any two of the three explanations suffice; channels that cannot be
    computed are reported as ``None`` and count as not satisfied.
    """
    present = [e for e in (attr, surr, cfs) if e is not None]
    if len(present) < 2:
        raise PreconditionError("consensus needs at least two explanations")
    _check_ids(*present)
    rho = jac = sign = None
    if attr is not None and surr is not None:
        rho, jac, sign = rank_agreement(attr, surr, k)
    align, conv = (None, False)
    if cfs is not None:
        align, conv = cf_feature_alignment(cfs, attr, surr, k)
    shared = 0
    if attr is not None and surr is not None:
        shared = len(set(attr.feature_names) & set(surr.weights))
    return ConsensusReport(
        instance_id=present[0].instance_id,
        k=k,
        spearman_shap_lime=rho,
        topk_jaccard=jac,
        sign_agreement=sign,
        cf_alignment=align,
        cf_alignment_by_convention=conv,
        verdict=verdict(rho, jac, align, thresholds),
        thresholds=thresholds,
        n_shared_features=shared,
    )
