"""
How biased are straight-through hypergradients?
===============================================

The solver runs the rounded (one-hot) architecture forward but
differentiates as if the soft weights had been used.  Here the resulting
hypergradients are compared with those of a truly soft step from the same
point.
"""

from hgdas import ExperimentConfig, ste_bias_stats

cfg = ExperimentConfig()
for name in ("hgd_as_ista", "hgd_as_fista"):
    print(name)
    for pid, s in ste_bias_stats(cfg, name, n_signals=3).items():
        print(f"  {pid:>8}: median rel. gap {s['median']:.3g}, max {s['max']:.3g}")
