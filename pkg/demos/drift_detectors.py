"""
ADWIN and DDM on synthetic error streams
========================================

ADWIN watches a Bernoulli stream whose mean jumps from 0.2 to 0.8 and shrinks
its window at the change. DDM watches a classifier error rate that rises from
0.1 to 0.5 and reports the warning and drift positions.
"""

import numpy as np

from sshad import Adwin, Ddm, StreamSpec, gen_stream

rng = np.random.default_rng(3)
values = np.r_[rng.random(1000) < 0.2, rng.random(1000) < 0.8].astype(float)

adwin = Adwin(delta=0.002)
for t, v in enumerate(values):
    if adwin.add(v):
        print(f"ADWIN cut at t={t}: width {adwin.width}, mean {adwin.mean:.3f}")
print(f"final window: width {adwin.width}, mean {adwin.mean:.3f}, {adwin.n_buckets} buckets")

errors = gen_stream(StreamSpec("bernoulli", seed=5, length=4000, drift_points=(2000,),
                               error_rates=(0.1, 0.5)))
ddm = Ddm()
for t, (_, e) in enumerate(errors, 1):
    if ddm.add(e) == "drift":
        k_w, k_d = ddm.context_window()
        print(f"DDM drift: warning at {k_w}, drift at {k_d}")
