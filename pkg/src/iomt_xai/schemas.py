"""JSON Schemas for every file in a pipeline bundle."""

from __future__ import annotations

import jsonschema

from .errors import DataError

_num = {"type": "number"}
_count = {"type": "integer", "minimum": 0}
_unit = {"type": "number", "minimum": 0, "maximum": 1}
_opt_num = {"type": ["number", "null"]}
_counts = {"type": "object", "additionalProperties": _count}
_names = {"type": "array", "items": {"type": "string"}}
_id = {"type": ["integer", "string", "null"]}


def _doc(props: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "properties": {"schema_version": {"const": 1}, **props},
        "required": ["schema_version", *required],
    }


PREPROCESS_REPORT = _doc(
    {
        "rows_in": _count,
        "rows_out": _count,
        "columns_in": _count,
        "columns_out": _count,
        "dropped_duplicate_rows": _count,
        "dropped_missing_rows": _count,
        "dropped_missing_columns": _names,
        "dropped_zero_variance_columns": _names,
        "class_counts_before": _counts,
        "class_counts_after": _counts,
        "class_counts_resampled": _counts,
        "binary_counts": _counts,
        "synthetic_rows": _counts,
    },
    ["rows_in", "rows_out", "dropped_duplicate_rows", "dropped_missing_columns",
     "dropped_zero_variance_columns", "class_counts_before", "class_counts_after"],
)

DATASET_META = _doc(
    {
        "feature_names": _names,
        "label_column": {"type": "string"},
        "normal_class": {"type": "string"},
        "attack_classes": {"type": ["array", "null"], "items": {"type": "string"}},
        "scaler": {
            "type": ["object", "null"],
            "properties": {"columns": _names, "min": {"type": "array"}, "max": {"type": "array"}},
            "required": ["columns", "min", "max"],
        },
        "resample_plan": {"type": ["object", "null"]},
    },
    ["feature_names", "label_column", "normal_class", "scaler"],
)

_eval = {
    "type": "object",
    "properties": {
        "kind": {"type": "string"},
        "confusion": {"type": "array", "items": {"type": "array", "items": _count, "minItems": 2, "maxItems": 2},
                      "minItems": 2, "maxItems": 2},
        "accuracy": _unit,
        "precision_macro": _unit,
        "recall_macro": _unit,
        "f1_macro": _unit,
        "precision_weighted": _unit,
        "recall_weighted": _unit,
        "f1_weighted": _unit,
    },
    "required": ["kind", "confusion", "accuracy", "precision_weighted", "recall_weighted", "f1_weighted"],
}

METRICS = _doc(
    {"primary": {"type": "string"}, "models": {"type": "array", "items": _eval, "minItems": 1}},
    ["primary", "models"],
)

MODEL = _doc(
    {"kind": {"type": "string"}, "feature_names": _names, "model": {"type": "object"}},
    ["kind", "feature_names", "model"],
)

ATTRIBUTION = _doc(
    {
        "instance_id": _id,
        "base_value": _num,
        "prediction": _num,
        "method": {"enum": ["exact", "sampled"]},
        "n_samples": _count,
        "phi": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"feature": {"type": "string"}, "value": _num, "phi": _num},
                "required": ["feature", "value", "phi"],
            },
        },
    },
    ["base_value", "prediction", "method", "phi", "n_samples"],
)

SURROGATE = _doc(
    {
        "instance_id": _id,
        "intercept": _num,
        "weights": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"feature": {"type": "string"}, "weight": _num, "instance_value": _opt_num},
                "required": ["feature", "weight"],
            },
        },
        "fidelity": _num,
        "kernel_width": _num,
        "n": _count,
        "seed": {"type": ["integer", "null"]},
        "predicted_class": {"enum": [0, 1]},
    },
    ["intercept", "weights", "fidelity", "kernel_width", "n", "seed"],
)

COUNTERFACTUALS = _doc(
    {
        "instance_id": _id,
        "original": {
            "type": "object",
            "properties": {"features": {"type": "object"}, "prediction": {"enum": [0, 1]}},
            "required": ["features", "prediction"],
        },
        "counterfactuals": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "features": {"type": "object"},
                    "prediction": {"enum": [0, 1]},
                    "valid": {"type": "boolean"},
                    "proximity": {"type": "number", "minimum": 0},
                    "sparsity": _count,
                },
                "required": ["features", "prediction", "valid", "proximity", "sparsity"],
            },
        },
        "diversity": {"type": "number", "minimum": 0},
        "objective": _num,
        "query": {"type": "object"},
    },
    ["original", "counterfactuals", "diversity", "objective", "query"],
)

CONSENSUS = _doc(
    {
        "instance_id": _id,
        "spearman_shap_lime": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "topk_jaccard": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "sign_agreement": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "cf_alignment": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "verdict": {"enum": ["consistent", "partial", "inconsistent"]},
    },
    ["spearman_shap_lime", "topk_jaccard", "sign_agreement", "cf_alignment", "verdict"],
)

RUN = _doc(
    {"seed": {"type": "integer"}, "seeds": {"type": "object"}, "versions": {"type": "object"},
     "steps": {"type": "array", "items": {"type": "string"}}},
    ["seed", "seeds", "versions"],
)

ERROR = {
    "type": "object",
    "properties": {"error": {"type": "string"}, "message": {"type": "string"}, "exit_code": {"type": "integer"}},
    "required": ["error", "message", "exit_code"],
}

BY_FILENAME = {
    "preprocess_report.json": PREPROCESS_REPORT,
    "dataset_meta.json": DATASET_META,
    "metrics.json": METRICS,
    "model.json": MODEL,
    "shap.json": ATTRIBUTION,
    "lime.json": SURROGATE,
    "dice.json": COUNTERFACTUALS,
    "consensus.json": CONSENSUS,
    "run.json": RUN,
}


def validate(doc: dict, schema: dict, what: str = "document") -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise DataError(f"{what} does not match its schema: {exc.message}") from None
