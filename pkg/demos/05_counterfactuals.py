"""What would have to change for a flagged flow to look normal?"""

import numpy as np
from _data import desk_data, desk_forest

from iomt_xai.dice import CounterfactualQuery, cf_report, generate_counterfactuals

scaler, train, test = desk_data()
forest = desk_forest(train)
i = int(np.flatnonzero(forest.predict(test.values) == 1)[0])

# host CPU idle time is treated as something an attacker cannot change
query = CounterfactualQuery(test.values[i], target=0, k=3, immutable=("scputimes_idle",), seed=0)
cfs = generate_counterfactuals(forest, query, instance_id=i)
print(f"valid: {cfs.valid.tolist()}  sparsity: {cfs.sparsity.tolist()}  diversity {cfs.diversity:.3f}")
print(cf_report(cfs, scaler).to_text())
