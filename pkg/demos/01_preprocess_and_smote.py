"""Cleaning, scaling and rebalancing a skewed capture.

The raw synthetic capture mimics the class skew of a real medical-IoT
trace: lots of normal traffic, few ransomware and buffer-overflow rows.
SMOTE fills the rare classes, then every class is sampled to its target.
"""

import numpy as np

from iomt_xai.resample import apply_plan, reference_plan, smote_upsample
from iomt_xai.synthetic import IMBALANCED_COUNTS, make_iomt_like
from iomt_xai.tabular import apply_scaler, binarize_labels, class_counts, clean, drop_zero_variance, fit_scaler

raw = make_iomt_like(IMBALANCED_COUNTS, seed=0)
print("raw class counts:", class_counts(raw))

cleaned, report = clean(raw)
cleaned, dropped = drop_zero_variance(cleaned)
scaler = fit_scaler(cleaned)
scaled = apply_scaler(cleaned, scaler)
print(f"after cleaning: {cleaned.n_rows} rows, {cleaned.n_features} features, dropped constant: {dropped}")

balanced, _ = apply_plan(scaled, reference_plan(seed=0))
print("balanced class counts:", class_counts(balanced))
b = binarize_labels(balanced).binary
print(f"binary split: {(b == 0).sum()} normal / {(b == 1).sum()} attack")

# every synthetic row is source + u * (neighbour - source), reproducible from its record
grown, prov = smote_upsample(scaled, "Buffer_Overflow", 500, k=5, seed=0)
synth = grown.values[scaled.n_rows:]
x, nn = scaled.values[prov.source], scaled.values[prov.neighbor]
print(f"{len(prov)} synthetic Buffer_Overflow rows, first weights {np.round(prov.u[:3], 3)}")
print("rebuilt exactly from provenance:", np.array_equal(synth, x + prov.u[:, None] * (nn - x)))
