"""A local linear surrogate around one flow."""

import numpy as np
from _data import desk_data, desk_forest

from iomt_xai.lime import LimeConfig, TrainStats, explain_lime

scaler, train, test = desk_data()
forest = desk_forest(train)
i = int(np.flatnonzero(forest.predict(test.values) == 1)[0])

expl = explain_lime(forest, test.values[i], TrainStats.from_table(train), LimeConfig(seed=0),
                    instance_id=i, scaler=scaler)
print(f"predicted class {expl.predicted_class} with p={expl.predicted_proba:.3f}, "
      f"local fidelity {expl.local_fidelity:.3f}")
for f, w in sorted(expl.weights.items(), key=lambda kv: -abs(kv[1])):
    print(f"  {f:<22} {w:+.4f}   (raw value {expl.instance_values[f]:.4g})")
