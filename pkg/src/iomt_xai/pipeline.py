"""Config-driven end-to-end pipeline writing a report bundle to disk.

Bundle layout under ``output_dir``::

    dataset.csv               balanced, scaled dataset (raw text labels)
    dataset_meta.json         feature names, label map, scaler bounds, plan
    preprocess_report.json    cleaning / resampling bookkeeping
    model.json                serialised primary model
    metrics.json              one evaluation row per trained model kind
    explanations/instance_<i>/{shap,lime,dice,consensus}.json [+ force_plot.svg]
    summary.txt               text report
    run.json                  seeds, versions and (unless canonical) timings
"""

from __future__ import annotations

import copy
import json
import os
import platform
import sys
import tempfile
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__
from . import dice as dice_mod
from . import lime as lime_mod
from . import shap as shap_mod
from .consensus import Thresholds, build_consensus
from .errors import ConfigError, DataError, PreconditionError
from .models import (
    KINDS,
    DenseNetParams,
    ForestParams,
    evaluate,
    load_model,
    train_dense_net,
    train_knn,
    train_logistic_regression,
    train_random_forest,
    train_test_split,
)
from .models.io import model_to_dict
from .resample import ResamplePlan, apply_plan, class_counts
from .schemas import BY_FILENAME, validate
from .tabular import (
    DEFAULT_ATTACKS,
    FeatureTable,
    ScalerParams,
    apply_scaler,
    binarize_labels,
    clean,
    drop_zero_variance,
    fit_scaler,
    load_csv,
    write_csv,
)

METHODS = ("shap", "lime", "dice")

DEFAULTS: dict[str, Any] = {
    "input_csv": None,
    "label_column": "Label",
    "normal_class": "Normal",
    "attack_classes": list(DEFAULT_ATTACKS),
    "missing_threshold": 0.0,
    "scale": True,
    "resample": {
        "enabled": True,
        "smote": True,
        "targets": {"Normal": 2000, "DDoS": 500, "MitM": 500, "Ransomware": 500, "Buffer_Overflow": 500},
        "k_neighbors": 5,
    },
    "split": {"test_fraction": 0.25, "stratify": True},
    "model": {"kind": "random_forest", "params": {}},
    "compare_models": ["logistic_regression", "knn", "dense_net"],
    "explain": {
        "instances": [0],
        "methods": list(METHODS),
        "svg": False,
        "background_size": 100,
        "background_balanced": True,
        "shap": {"mode": "auto", "n_permutations": 200, "exact_max_features": shap_mod.EXACT_MAX_FEATURES},
        "lime": {"n_features": 10, "n_perturbations": 5000, "kernel_width": None, "ridge": 1e-3},
        "dice": {"k": 3, "lambda": 10.0, "beta": 1.0, "population": 200, "generations": 100,
                 "mutation_rate": 0.2, "mutation_scale": 0.1, "immutable": []},
        "consensus": {"k": 5, "spearman": 0.5, "jaccard": 0.4, "cf_alignment": 0.5},
    },
    "seed": 0,
    "output_dir": "iomt_xai_out",
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key not in ("targets", "params"):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def derive_seed(seed: int, tag: str) -> int:
    """Independent 32-bit seed for one pipeline stage."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(tag.encode())])
    return int(ss.generate_state(1, np.uint32)[0])


@dataclass
class PipelineConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, d: dict | None = None, **overrides) -> "PipelineConfig":
        """Defaults, then ``d`` (a config document), then non-``None`` ``overrides``."""
        data = _merge(DEFAULTS, d or {})
        flags = {k: v for k, v in overrides.items() if v is not None}
        if "seed" in flags:
            data["seed"] = int(flags["seed"])
        if "output_dir" in flags:
            data["output_dir"] = str(flags["output_dir"])
        if "instances" in flags:
            data["explain"]["instances"] = list(flags["instances"])
        if "methods" in flags:
            data["explain"]["methods"] = list(flags["methods"])
        if "svg" in flags:
            data["explain"]["svg"] = bool(flags["svg"])
        cfg = cls(data)
        cfg.check_values()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, **overrides) -> "PipelineConfig":
        doc = {}
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            try:
                doc = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
            # relative paths in a config resolve against the config's directory
            for key in ("input_csv", "output_dir"):
                if isinstance(doc.get(key), str) and not Path(doc[key]).is_absolute():
                    doc[key] = str(path.parent / doc[key])
        return cls.from_dict(doc, **overrides)

    def __getitem__(self, key: str):
        return self.data[key]

    @property
    def out(self) -> Path:
        return Path(self.data["output_dir"])

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def seeds(self) -> dict[str, int]:
        return {tag: derive_seed(self.seed, tag) for tag in ("resample", "split", "model", "background", "shap", "lime", "dice")}

    def check_values(self) -> None:
        d = self.data
        if not 0 <= d["seed"] < 2**63:
            raise ConfigError("seed must be a non-negative integer")
        if d["model"]["kind"] not in KINDS:
            raise ConfigError(f"model.kind must be one of {KINDS}")
        bad = [k for k in d["compare_models"] if k not in KINDS]
        if bad:
            raise ConfigError(f"compare_models has unknown kinds {bad}")
        if not 0.0 < d["split"]["test_fraction"] < 1.0:
            raise ConfigError("split.test_fraction must lie in (0, 1)")
        bad = [m for m in d["explain"]["methods"] if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown explanation methods {bad}; choose from {METHODS}")
        if any((not isinstance(i, int)) or i < 0 for i in d["explain"]["instances"]):
            raise ConfigError("explain.instances must be non-negative integers")
        if d["explain"]["shap"]["mode"] not in ("auto", "exact", "sampled"):
            raise ConfigError("explain.shap.mode must be auto, exact or sampled")
        if d["resample"]["enabled"] and not d["resample"]["targets"]:
            raise ConfigError("resample.targets must be given when resampling is enabled")

    def check_input(self) -> None:
        """Validate the input CSV path and its header before any work starts."""
        path = self.data["input_csv"]
        if not path:
            raise ConfigError("input_csv is required")
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"input_csv not found: {path}")
        with path.open(encoding="utf-8") as fh:
            header = [h.strip() for h in fh.readline().rstrip("\r\n").split(",")]
        if self.data["label_column"] not in header:
            raise ConfigError(f"label column {self.data['label_column']!r} not in the header of {path}")


# --------------------------------------------------------------------------
# file helpers


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Path, doc: dict) -> None:
    schema = BY_FILENAME.get(path.name)
    if schema is not None:
        validate(doc, schema, path.name)
    _atomic_write(path, _dump(doc))


def read_json(path: Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"missing bundle file {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from None
    schema = BY_FILENAME.get(Path(path).name)
    if schema is not None:
        validate(doc, schema, str(path))
    return doc


def _write_table(path: Path, table: FeatureTable) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write_csv(table, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# steps


def cmd_preprocess(cfg: PipelineConfig) -> dict:
    """Clean, drop constant columns, scale, resample; write dataset + report."""
    cfg.check_input()
    d = cfg.data
    raw = load_csv(d["input_csv"], d["label_column"])
    table, report = clean(raw, d["missing_threshold"])
    table, dropped = drop_zero_variance(table)
    report.dropped_zero_variance_columns = dropped
    report.columns_out = table.n_features
    binarize_labels(table, d["normal_class"], d["attack_classes"])  # fail early on unknown labels

    scaler = fit_scaler(table) if d["scale"] else None
    if scaler is not None:
        table = apply_scaler(table, scaler)

    plan = None
    synthetic: dict[str, int] = {}
    if d["resample"]["enabled"]:
        plan = ResamplePlan(d["resample"]["targets"], d["resample"]["k_neighbors"], cfg.seeds()["resample"])
        table, prov = apply_plan(table, plan, smote=d["resample"]["smote"])
        synthetic = {c: len(p) for c, p in sorted(prov.items())}
    table = binarize_labels(table, d["normal_class"], d["attack_classes"])

    out = cfg.out
    _write_table(out / "dataset.csv", table)
    meta = {
        "schema_version": 1,
        "feature_names": list(table.column_names),
        "label_column": d["label_column"],
        "normal_class": d["normal_class"],
        "attack_classes": d["attack_classes"],
        "scaler": None if scaler is None else scaler.to_dict(),
        "resample_plan": None if plan is None else plan.to_dict(),
    }
    write_json(out / "dataset_meta.json", meta)
    rep = {"schema_version": 1, **report.to_dict()}
    rep["class_counts_resampled"] = class_counts(table)
    rep["binary_counts"] = {str(c): int((table.binary == c).sum()) for c in (0, 1)}
    rep["synthetic_rows"] = synthetic
    write_json(out / "preprocess_report.json", rep)
    return {"table": table, "report": rep, "meta": meta}


def load_dataset(out: Path) -> tuple[FeatureTable, dict]:
    meta = read_json(out / "dataset_meta.json")
    path = out / "dataset.csv"
    if not path.is_file():
        raise DataError(f"missing dataset file {path}; run preprocess first")
    table = load_csv(path, meta["label_column"])
    if list(table.column_names) != meta["feature_names"]:
        raise DataError("dataset.csv columns disagree with dataset_meta.json")
    return binarize_labels(table, meta["normal_class"], meta["attack_classes"]), meta


def _split(cfg: PipelineConfig, table: FeatureTable):
    s = cfg.data["split"]
    return train_test_split(table, s["test_fraction"], s["stratify"], cfg.seeds()["split"])


def _train(kind: str, train: FeatureTable, params: dict, seed: int):
    params = dict(params)
    params.setdefault("seed", seed)
    try:
        if kind == "random_forest":
            return train_random_forest(train, ForestParams(**params))
        if kind == "logistic_regression":
            return train_logistic_regression(train, **params)
        if kind == "knn":
            params.pop("seed")
            return train_knn(train, **params)
        if kind == "dense_net":
            if "widths" in params:
                params["widths"] = tuple(params["widths"])
            return train_dense_net(train, DenseNetParams(**params))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}") from None
    raise ConfigError(f"unknown model kind {kind!r}")


def cmd_train(cfg: PipelineConfig) -> dict:
    """Train the configured model (plus any comparison kinds) and write metrics."""
    table, _ = load_dataset(cfg.out)
    train, test = _split(cfg, table)
    kind = cfg.data["model"]["kind"]
    seed = cfg.seeds()["model"]
    model = _train(kind, train, cfg.data["model"]["params"], seed)
    doc = model_to_dict(model)
    write_json(cfg.out / "model.json", doc)
    rows = [{"kind": kind, **evaluate(model, test).to_dict()}]
    for other in cfg.data["compare_models"]:
        if other == kind:
            continue
        extra = _train(other, train, {}, seed)
        rows.append({"kind": other, **evaluate(extra, test).to_dict()})
    metrics = {"schema_version": 1, "primary": kind, "models": rows,
               "n_train": train.n_rows, "n_test": test.n_rows}
    write_json(cfg.out / "metrics.json", metrics)
    return {"model": model, "metrics": metrics}


def cmd_explain(cfg: PipelineConfig) -> dict:
    """Explain each configured test-split instance with the configured methods."""
    table, meta = load_dataset(cfg.out)
    train, test = _split(cfg, table)
    model = load_model(cfg.out / "model.json")
    scaler = ScalerParams.from_dict(meta["scaler"]) if meta["scaler"] else None
    e = cfg.data["explain"]
    methods = [m for m in METHODS if m in e["methods"]]
    seeds = cfg.seeds()
    for i in e["instances"]:
        if i >= test.n_rows:
            raise PreconditionError(f"instance index {i} out of range for {test.n_rows} test rows")
    if "shap" in methods and e["shap"]["mode"] == "exact" and test.n_features > e["shap"]["exact_max_features"]:
        raise PreconditionError(
            f"{test.n_features} features exceed the exact Shapley cap of {e['shap']['exact_max_features']}"
        )

    background = shap_mod.select_background(
        train, e["background_size"], seeds["background"], balanced=e["background_balanced"]
    ).values
    stats = lime_mod.TrainStats.from_table(train)
    results = {}
    for i in e["instances"]:
        x = test.values[i]
        folder = cfg.out / "explanations" / f"instance_{i}"
        attr = surr = cfs = None
        if "shap" in methods:
            sc = e["shap"]
            exact = sc["mode"] == "exact" or (sc["mode"] == "auto" and x.size <= sc["exact_max_features"])
            if exact:
                attr = shap_mod.shap_exact(model, x, background, sc["exact_max_features"], instance_id=i)
            else:
                attr = shap_mod.shap_sampled(model, x, background, sc["n_permutations"],
                                             derive_seed(seeds["shap"], str(i)), instance_id=i)
            attr.display_values = scaler.inverse(x, test.column_names) if scaler is not None else x
            write_json(folder / "shap.json", attr.to_dict())
            if e["svg"]:
                _atomic_write(folder / "force_plot.svg", shap_mod.force_plot_svg(attr))
        if "lime" in methods:
            lc = e["lime"]
            conf = lime_mod.LimeConfig(lc["n_perturbations"], lc["n_features"], lc["kernel_width"],
                                       lc["ridge"], derive_seed(seeds["lime"], str(i)))
            surr = lime_mod.explain_lime(model, x, stats, conf, scaler, instance_id=i)
            write_json(folder / "lime.json", surr.to_dict())
        if "dice" in methods:
            dc = e["dice"]
            pred = int(model.predict(x[None, :])[0])
            query = dice_mod.CounterfactualQuery(
                x, target=1 - pred, k=dc["k"], lam=dc["lambda"], beta=dc["beta"],
                immutable=tuple(dc["immutable"]), population=dc["population"],
                generations=dc["generations"], mutation_rate=dc["mutation_rate"],
                mutation_scale=dc["mutation_scale"], seed=derive_seed(seeds["dice"], str(i)),
            )
            cfs = dice_mod.generate_counterfactuals(model, query, instance_id=i)
            write_json(folder / "dice.json", cfs.to_dict(scaler))
        consensus = None
        if len(methods) >= 2:
            cc = e["consensus"]
            consensus = build_consensus(attr, surr, cfs, Thresholds(cc["spearman"], cc["jaccard"], cc["cf_alignment"]), cc["k"])
            write_json(folder / "consensus.json", consensus.to_dict())
        results[i] = {"shap": attr, "lime": surr, "dice": cfs, "consensus": consensus}
    return results


# --------------------------------------------------------------------------
# report


def _top(items: Iterable[tuple[str, float]], n: int = 5) -> list[tuple[str, float]]:
    return sorted(items, key=lambda kv: (-abs(kv[1]), kv[0]))[:n]


def render_summary(out: Path) -> str:
    """Deterministic plain-text summary of a bundle (validated file by file)."""
    lines = ["IoMT intrusion-detection XAI report", "=" * 35, ""]
    if (out / "preprocess_report.json").is_file():
        rep = read_json(out / "preprocess_report.json")
        lines += [
            "Preprocessing",
            f"  rows {rep['rows_in']} -> {rep['rows_out']} (duplicates dropped: {rep['dropped_duplicate_rows']})",
            f"  columns {rep.get('columns_in', '?')} -> {rep.get('columns_out', '?')}",
            f"  dropped (missing): {', '.join(rep['dropped_missing_columns']) or '-'}",
            f"  dropped (zero variance): {', '.join(rep['dropped_zero_variance_columns']) or '-'}",
            "  class counts before resampling: "
            + ", ".join(f"{k}={v}" for k, v in rep["class_counts_after"].items()),
        ]
        if "class_counts_resampled" in rep:
            lines.append("  class counts after resampling:  "
                         + ", ".join(f"{k}={v}" for k, v in rep["class_counts_resampled"].items()))
        if "binary_counts" in rep:
            b = rep["binary_counts"]
            lines.append(f"  binary: normal(0)={b.get('0', 0)} attack(1)={b.get('1', 0)}")
        lines.append("")
    if (out / "metrics.json").is_file():
        met = read_json(out / "metrics.json")
        lines += ["Model performance (weighted averages)",
                  f"  {'model':<22}{'accuracy':>10}{'precision':>11}{'recall':>9}{'f1':>8}"]
        for row in met["models"]:
            star = "*" if row["kind"] == met["primary"] else " "
            lines.append(
                f" {star}{row['kind']:<22}{row['accuracy'] * 100:>9.2f}%{row['precision_weighted']:>11.3f}"
                f"{row['recall_weighted']:>9.3f}{row['f1_weighted']:>8.3f}"
            )
        lines.append("")
    exp_dir = out / "explanations"
    folders = sorted(
        (p for p in exp_dir.glob("instance_*") if p.is_dir()),
        key=lambda p: int(p.name.split("_", 1)[1]) if p.name.split("_", 1)[1].isdigit() else 1 << 62,
    ) if exp_dir.is_dir() else []
    lines.append("Explanations")
    if not folders:
        lines += ["  no explanations", ""]
    for folder in folders:
        lines.append(f"  {folder.name}")
        if (folder / "shap.json").is_file():
            s = read_json(folder / "shap.json")
            lines.append(f"    SHAP ({s['method']}): base {s['base_value']:.4f} -> prediction {s['prediction']:.4f}")
            for name, v in _top((r["feature"], r["phi"]) for r in s["phi"]):
                lines.append(f"      {name:<28}{v:+.4f}")
        if (folder / "lime.json").is_file():
            s = read_json(folder / "lime.json")
            lines.append(f"    LIME: class {s.get('predicted_class')} fidelity {s['fidelity']:.3f}")
            for name, v in _top((r["feature"], r["weight"]) for r in s["weights"]):
                lines.append(f"      {name:<28}{v:+.4f}")
        if (folder / "dice.json").is_file():
            s = read_json(folder / "dice.json")
            cfs = s["counterfactuals"]
            n_valid = sum(c["valid"] for c in cfs)
            lines.append(f"    DiCE: original prediction {s['original']['prediction']}, "
                         f"{n_valid}/{len(cfs)} valid, diversity {s['diversity']:.4f}")
            for j, c in enumerate(cfs):
                lines.append(f"      cf{j + 1}: prediction {c['prediction']} proximity {c['proximity']:.4f} "
                             f"sparsity {c['sparsity']}")
        if (folder / "consensus.json").is_file():
            s = read_json(folder / "consensus.json")

            def fmt(v):
                return "n/a" if v is None else f"{v:.3f}"

            lines.append(f"    consensus: spearman {fmt(s['spearman_shap_lime'])} jaccard {fmt(s['topk_jaccard'])} "
                         f"sign {fmt(s['sign_agreement'])} cf-alignment {fmt(s['cf_alignment'])}")
            lines.append(f"    verdict: {s['verdict']}")
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def cmd_report(cfg_or_out) -> str:
    out = cfg_or_out.out if isinstance(cfg_or_out, PipelineConfig) else Path(cfg_or_out)
    if not out.is_dir():
        raise DataError(f"bundle directory not found: {out}")
    for path in sorted(out.rglob("*.json")):
        if path.name in BY_FILENAME:
            read_json(path)
    text = render_summary(out)
    _atomic_write(out / "summary.txt", text)
    return text


def _versions() -> dict:
    import scipy

    return {
        "iomt_xai": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_run_metadata(cfg: PipelineConfig, steps: list[str], timings: dict[str, float], canonical: bool) -> None:
    doc = {
        "schema_version": 1,
        "seed": cfg.seed,
        "seeds": cfg.seeds(),
        "versions": _versions(),
        "steps": steps,
        "config": cfg.data,
    }
    if canonical:
        # paths vary between otherwise identical runs; keep only file names
        config = copy.deepcopy(cfg.data)
        config["input_csv"] = Path(config["input_csv"]).name if config["input_csv"] else None
        config["output_dir"] = None
        doc["config"] = config
    else:
        doc["timings_seconds"] = {k: round(v, 3) for k, v in timings.items()}
        doc["created_unix"] = round(time.time(), 3)
        doc["argv"] = sys.argv
    write_json(cfg.out / "run.json", doc)


def run_all(cfg: PipelineConfig, canonical: bool = False) -> str:
    timings = {}
    steps = [("preprocess", cmd_preprocess), ("train", cmd_train), ("explain", cmd_explain), ("report", cmd_report)]
    text = ""
    for name, fn in steps:
        t0 = time.perf_counter()
        res = fn(cfg)
        timings[name] = time.perf_counter() - t0
        if name == "report":
            text = res
    write_run_metadata(cfg, [s for s, _ in steps], timings, canonical)
    return text
