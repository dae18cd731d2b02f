"""Random-state comparison of closed-form hypergradients with finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from . import classic
from .arch import SolverState, StructuralParams, momentum_point, step_weights
from .hypergrad import (
    PARAM_IDS,
    central_difference,
    fd_hypergradient,
    fista_chain_factor,
    hypergradients,
    soft_forward,
)
from .problem import GeneratorConfig, build_instance, rng_from
from .smooth import surrogate_gradient, surrogate_objective

__all__ = [
    "REL_TOL",
    "ABS_TOL",
    "SMALL",
    "random_state",
    "within_tolerance",
    "ParamStats",
    "GradcheckResult",
    "run_gradcheck",
]

REL_TOL = 1e-4
ABS_TOL = 1e-9
SMALL = 1e-6


def within_tolerance(analytic: float, numeric: float, rtol: float = REL_TOL) -> bool:
    diff = abs(analytic - numeric)
    if abs(analytic) < SMALL:
        return diff <= ABS_TOL
    return diff <= rtol * abs(analytic)


def random_state(rng: np.random.Generator, variant: str, M: int = 75, N: int = 150,
                 lam: float = 10.0, p: float = 50.0):
    """A soft-mode completed step at a realistic point of a random instance.

    Returns ``(state, params, prob)``.  The pre-step point comes from a few
    fixed-step iterations on a fresh instance; the parameters are random.
    """
    fista = variant == "fista"
    kind = "correlated_gaussian" if rng.random() < 0.5 else "iid_gaussian"
    cfg = GeneratorConfig(M=M, N=N, matrix_kind=kind, rho=0.5 if kind != "iid_gaussian" else 0.0,
                          seed=int(rng.integers(2**63)))
    prob = build_instance(cfg, lam)
    g0 = classic.default_gamma(prob.A)
    warm = int(rng.integers(0, 12))
    run = classic.fista if fista else classic.ista
    _, tr = run(prob, g0, warm)

    def pair():
        return tuple(float(b) for b in rng.normal(0.0, 1.5, size=2))

    params = StructuralParams(beta_r=pair(), beta_x=pair(), gamma=g0 * float(rng.uniform(0.5, 1.5)),
                              beta_z=pair() if fista else None)
    x = tr.iterates[-1]
    if fista:
        x_prev = x + 0.1 * rng.standard_normal(N) * (x != 0)
        s_t = 1.0 if rng.random() < 0.2 else float(rng.uniform(1.0, 20.0))
        pre = SolverState(t=warm, x_t=x_prev, z_t=x, s_t=s_t)
    else:
        pre = SolverState(t=warm, x_t=x)
    return soft_forward(pre, params, prob, p), params, prob


@dataclass
class ParamStats:
    max_rel: float = 0.0
    n_small: int = 0
    n_fail: int = 0
    n: int = 0

    def add(self, analytic: float, numeric: float):
        self.n += 1
        if abs(analytic) < SMALL:
            self.n_small += 1
        else:
            self.max_rel = max(self.max_rel, abs(analytic - numeric) / abs(analytic))
        if not within_tolerance(analytic, numeric):
            self.n_fail += 1


@dataclass
class GradcheckResult:
    stats: Dict[str, ParamStats] = field(default_factory=dict)
    negation_violations: int = 0

    @property
    def passed(self) -> bool:
        return self.negation_violations == 0 and all(s.n_fail == 0 for s in self.stats.values())

    def lines(self) -> List[str]:
        out = []
        for key, s in self.stats.items():
            status = "ok" if s.n_fail == 0 else "FAIL"
            out.append(f"{key:<16s} max_rel={s.max_rel:.3e} small={s.n_small} "
                       f"fail={s.n_fail}/{s.n} {status}")
        out.append(f"negation identity violations: {self.negation_violations}")
        return out


def _chain_factor_check(state, params, prob, p, rng):
    """Analytic ``dz/dx_next`` factor vs a directional difference."""
    w_z = step_weights(params).soft_z
    c = fista_chain_factor(w_z, state.s_t, state.s_next)
    d = rng.standard_normal(prob.N)
    d /= np.linalg.norm(d)

    def z_of(x_next):
        return w_z[0] * momentum_point(x_next, state.x_t, state.s_next, state.s_t) + w_z[1] * x_next

    analytic = c * float(surrogate_gradient(state.z_next, prob, p) @ d)
    numeric = central_difference(
        lambda e: surrogate_objective(z_of(state.x_next + e * d), prob, p), 0.0, 1e-6)
    return analytic, numeric


def run_gradcheck(seed: int = 7, cases: int = 100, M: int = 75, N: int = 150,
                  lam: float = 10.0, p: float = 50.0) -> GradcheckResult:
    res = GradcheckResult()
    for variant, ids in (("ista", PARAM_IDS[:5]), ("fista", PARAM_IDS)):
        rng = rng_from(seed, 0 if variant == "ista" else 1)
        for key in ids:
            res.stats[f"{variant}.{key}"] = ParamStats()
        if variant == "fista":
            res.stats["fista.chain"] = ParamStats()
        for _ in range(cases):
            state, params, prob = random_state(rng, variant, M, N, lam, p)
            hg = hypergradients(state, params, prob, p)
            for pair in (hg.d_beta_r, hg.d_beta_x) + ((hg.d_beta_z,) if variant == "fista" else ()):
                if pair[1] != -pair[0]:
                    res.negation_violations += 1
            for key in ids:
                res.stats[f"{variant}.{key}"].add(hg.get(key),
                                                  fd_hypergradient(key, state, params, prob, p))
            if variant == "fista":
                res.stats["fista.chain"].add(*_chain_factor_check(state, params, prob, p, rng))
    return res
