"""
Per-signal cost of online adaptation
====================================

The online solvers compute hypergradients every iteration, so each signal
costs more than a fixed run, but there is no training phase at all.
Absolute times depend on the machine.
"""

from hgdas import ExperimentConfig, timing_report

table = timing_report(ExperimentConfig(), n_signals=10)
print(table.format())
for claim, holds in table.structural_claims().items():
    print(f"{claim}: {holds}")
