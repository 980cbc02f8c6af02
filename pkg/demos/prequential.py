"""
Prequential evaluation and fold averaging
=========================================

Each instance is predicted before it is learned. Ten shuffles of the same
stream give ten reports, which are averaged into one row with standard
deviations, the way the pipeline summarizes a sampling ratio.
"""

import numpy as np

from sshad import HadConfig, HoeffdingAdaptiveTree, StreamSpec, gen_stream, kappa, kfold_average
from sshad.evaluation import prequential_run

print("kappa([[40, 10], [20, 30]]) =", kappa([[40, 10], [20, 30]]))

stream = gen_stream(StreamSpec("hyperplane", seed=2, length=3000, n_features=4,
                               class_balance=0.3))
reports = []
for fold in range(10):
    order = np.random.default_rng(fold).permutation(len(stream))
    model = HoeffdingAdaptiveTree(4, 2, HadConfig(grace_period=100))
    reports.append(prequential_run(model, (stream[i] for i in order), snapshot_every=500))

r = reports[0]
print("fold 0 trace:", [(s.index, round(s.accuracy, 3)) for s in r.trace])
agg = kfold_average(reports)
print(f"10-fold: accuracy {agg.accuracy:.4f} +/- {agg.accuracy_std:.4f}, "
      f"kappa {agg.kappa:.4f} +/- {agg.kappa_std:.4f}, cost {agg.ram_hours:.2e} GB-h")
