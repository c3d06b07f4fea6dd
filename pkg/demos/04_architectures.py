"""
Serial, parallel or both?
=========================

Three drafters with the same seven-token reach:

* serial_only runs the small model seven times;
* parallel_only predicts all seven positions in one shot from the context;
* hybrid runs two serial steps and lets skip-gram heads do the rest.

The cost model charges per serial step, per parallel pass, per verification
and a fixed overhead.  The unit costs are illustrative, so read the speedups
as a comparison rather than wall-clock predictions.
"""

import numpy as np

from specdraft import ExperimentConfig, compare_architectures
from specdraft.harness import DecodeConfig

cfg = ExperimentConfig(decode=DecodeConfig(seed=0))
results = compare_architectures(cfg)
print(f"{'architecture':14s} {'tau':>6s} {'speedup':>8s}  per-position acceptance")
for r in results:
    print(f"{r.architecture:14s} {r.tau:6.3f} {r.cost_speedup:8.3f}  {np.round(r.rates, 3)}")

# %%
# serial_only pays for every step, so it loses ground fastest as c_T grows;
# parallel_only does not care about c_T at all.
from specdraft.harness import Costs, architecture_configs, architecture_round_cost

taus = {r.architecture: r.tau for r in results}
for c_T in (0.02, 0.1, 0.3):
    costs = Costs(c_T=c_T)
    row = {a: taus[a] / architecture_round_cost(c.drafter, costs) for a, c in architecture_configs(cfg).items()}
    print(f"c_T={c_T:4.2f}: " + "  ".join(f"{a} {v:.2f}" for a, v in row.items()))
