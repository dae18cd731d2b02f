"""
Closed-form hypergradients against finite differences
=====================================================

On a fully smoothed one-step forward, the closed-form derivative of the
surrogate objective with respect to gamma and each logit should agree with
a central difference.
"""

from hgdas import PARAM_IDS, fd_hypergradient, hypergradients, run_gradcheck
from hgdas.gradcheck import random_state
from hgdas.problem import rng_from

state, params, prob = random_state(rng_from(0), "fista")
hg = hypergradients(state, params, prob, 50.0)
print(f"{'parameter':>10} {'closed form':>14} {'central diff':>14}")
for pid in PARAM_IDS:
    print(f"{pid:>10} {hg.get(pid):14.6e} {fd_hypergradient(pid, state, params, prob, 50.0):14.6e}")

# %%
# The full suite over many random states, as run by ``hgdas gradcheck``.

for line in run_gradcheck(seed=7, cases=20).lines():
    print(line)
