"""Do SHAP, LIME and the counterfactuals tell the same story?"""

import numpy as np
from _data import desk_data, desk_forest

from iomt_xai.consensus import build_consensus
from iomt_xai.dice import CounterfactualQuery, generate_counterfactuals
from iomt_xai.lime import LimeConfig, TrainStats, explain_lime
from iomt_xai.shap import select_background, shap_sampled

_, train, test = desk_data()
forest = desk_forest(train)
bg = select_background(train, 100, seed=0, balanced=True).values
stats = TrainStats.from_table(train)

for i in np.flatnonzero(forest.predict(test.values) == 1)[:3]:
    x = test.values[i]
    attr = shap_sampled(forest, x, bg, n_permutations=300, instance_id=int(i))
    surr = explain_lime(forest, x, stats, LimeConfig(seed=0), instance_id=int(i))
    cfs = generate_counterfactuals(forest, CounterfactualQuery(x, target=0, seed=0), instance_id=int(i))
    rep = build_consensus(attr, surr, cfs)
    print(f"instance {i}: spearman {rep.spearman_shap_lime:.2f}, top-5 jaccard {rep.topk_jaccard:.2f}, "
          f"cf alignment {rep.cf_alignment:.2f} -> {rep.verdict}")
