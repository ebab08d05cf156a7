"""Shapley attributions for one flagged flow, exact and sampled."""

from pathlib import Path

import numpy as np
from _data import desk_data, desk_forest

from iomt_xai.shap import force_plot_data, force_plot_svg, select_background, shap_exact, shap_sampled

_, train, test = desk_data()
forest = desk_forest(train)
i = int(np.flatnonzero(forest.predict(test.values) == 1)[0])
x = test.values[i]

bg = select_background(train, 100, seed=0, balanced=True)
attr = shap_sampled(forest, x, bg.values, n_permutations=500, seed=0, instance_id=i)
print(f"base value {attr.base_value:.4f} -> prediction {attr.prediction:.4f}")
for bar in force_plot_data(attr)[:6]:
    print(f"  {bar.feature:<22} {bar.phi:+.4f}")

# on 8 features exact enumeration is cheap, so the estimate can be checked directly
cols = list(train.column_names[:8])
small = desk_forest(train.select_columns(cols), n_trees=50)
B8 = select_background(train.select_columns(cols), 50, seed=0).values
exact = shap_exact(small, x[:8], B8)
est = shap_sampled(small, x[:8], B8, n_permutations=2000)
print("max |sampled - exact| / SE:", float(np.max(np.abs(est.phi - exact.phi) / np.maximum(est.std_errors, 1e-12))))

Path("force_plot.svg").write_text(force_plot_svg(attr))
print("wrote force_plot.svg")
