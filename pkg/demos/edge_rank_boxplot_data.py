"""
Within-cluster edge ranks with and without a random effect
==========================================================

Collect T_s for every cluster and the total V over repeated datasets, once
under the null and once with tau2 = 4, and print five-number summaries.
Under the alternative both shift down: neighbours in X that share a
cluster also share an intercept, so their responses are closer.
"""

import numpy as np

from graphranktest import LmmConfig, run_trials

for tau2 in (0.0, 4.0):
    cfg = LmmConfig(1, 200, 200, 4, tau2=tau2, snr=5.0)
    res = run_trials(cfg, 60, seed=0, k=1)
    T = np.array([r["T"] for r in res.records if r["status"] == "ok"])
    print(f"tau2 = {tau2:g}")
    for s in range(T.shape[1]):
        q = np.percentile(T[:, s], [0, 25, 50, 75, 100])
        print(f"  T_{s + 1}: " + "  ".join(f"{v:6.2f}" for v in q))
    q = np.percentile(T.sum(axis=1), [0, 25, 50, 75, 100])
    print("  V:   " + "  ".join(f"{v:6.2f}" for v in q))
