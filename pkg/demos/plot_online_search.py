"""
Online architecture search while solving
========================================

HGD-AS-ISTA starts from the ISTA architecture (gradient step, then
shrinkage) and moves the step size and the operation logits after every
iteration.  The same happens for HGD-AS-FISTA with a third, momentum slot.
"""

import numpy as np

from hgdas import ExperimentConfig, heatmap_matrix, run_experiment

cfg = ExperimentConfig(n_matrices=4, n_signals=5, master_seed=1)
rep = run_experiment(cfg)

# %%
# Mean squared error over the 20 signals, every fifth iteration.

names = list(rep.summaries)
print(f"{'t':>3} " + " ".join(f"{n:>13}" for n in names))
for t in range(0, cfg.T + 1, 5):
    print(f"{t:>3} " + " ".join(f"{rep.summaries[n].mean_mse[t]:13.4f}" for n in names))

# %%
# The selected architecture: one row per slot, one column per signal; a 1
# means the slot picked its first operation (gradient step for r and x,
# momentum for z).

for name in ("ista_fixed", "hgd_as_ista", "hgd_as_fista"):
    labels, H = heatmap_matrix([tr for _, _, tr in rep.traces[name]])
    print(f"\n{name}: first operation chosen in {H.mean():.0%} of slots")
    for lab, row in list(zip(labels, H))[:9]:
        print(f"  {lab:>4} " + "".join("#" if v else "." for v in row))

# %%
# The step size is adapted too; it typically ends above 1/s_max**2.

tr = rep.traces["hgd_as_ista"][0][2]
print(f"\ngamma: start {tr.gamma[0]:.6g}, end {tr.final_params.gamma:.6g}")
print("final logits beta_r, beta_x:", np.round(tr.final_params.beta_r, 3),
      np.round(tr.final_params.beta_x, 3))
