"""Online HGD-AS-ISTA / HGD-AS-FISTA.

Each iteration rounds the current softmax weights, takes one hard forward
step, computes every hypergradient from that step, and then moves all
parameters at once: ``a <- a - eta * dJs/da``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .arch import SolverState, StructuralParams, as_fista_step, as_ista_step, step_weights
from .classic import ClassicTrace, default_gamma
from .hypergrad import HypergradSet, hypergradients
from .smooth import objective, surrogate_objective

__all__ = [
    "GAMMA_MIN",
    "SolverDivergence",
    "HgdConfig",
    "RunTrace",
    "hgd_update",
    "hgd_as_ista",
    "hgd_as_fista",
    "run_hgd",
]

GAMMA_MIN = 1e-12


class SolverDivergence(FloatingPointError):
    """A non-finite value appeared; ``iteration`` is where it was detected."""

    def __init__(self, iteration: int, what: str):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration
        self.what = what


def hgd_update(alpha: float, grad: float, eta: float, floor: Optional[float] = None) -> float:
    """``alpha - eta * grad``, optionally clamped from below at ``floor``."""
    if eta < 0:
        raise ValueError(f"meta learning rate must be nonnegative, got {eta}")
    if not math.isfinite(grad):
        raise FloatingPointError(f"non-finite hypergradient {grad}")
    new = alpha - eta * grad
    if floor is not None and new < floor:
        return floor
    return new


@dataclass(frozen=True)
class HgdConfig:
    """Settings of one online run.

    ``init_params=None`` starts from the canonical ISTA/FISTA architecture
    with ``gamma = 1/s_max**2`` of the instance.  Meta rates of zero freeze
    the corresponding parameters.
    """

    T: int = 40
    eta_r: float = 1e-1
    eta_x: float = 1e-1
    eta_gamma: float = 5e-9
    eta_z: Optional[float] = None
    p: float = 50.0
    variant: str = "ista"
    init_params: Optional[StructuralParams] = None
    gamma_min: float = GAMMA_MIN

    def __post_init__(self):
        if self.variant not in ("ista", "fista"):
            raise ValueError(f"variant must be 'ista' or 'fista', got {self.variant!r}")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        rates = [self.eta_r, self.eta_x, self.eta_gamma]
        if self.variant == "fista":
            if self.eta_z is None:
                raise ValueError("the fista variant needs eta_z")
            rates.append(self.eta_z)
        if any(not (r >= 0 and math.isfinite(r)) for r in rates):
            raise ValueError(f"meta learning rates must be finite and nonnegative, got {rates}")
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.init_params is not None and self.init_params.is_fista != (self.variant == "fista"):
            raise ValueError("init_params do not match the variant")

    @classmethod
    def default_ista(cls, **kw) -> "HgdConfig":
        base = dict(T=40, eta_r=1e-1, eta_x=1e-1, eta_gamma=5e-9, p=50.0, variant="ista")
        base.update(kw)
        return cls(**base)

    @classmethod
    def default_fista(cls, **kw) -> "HgdConfig":
        base = dict(T=40, eta_r=1e-1, eta_x=5e-2, eta_z=5e-2, eta_gamma=5e-9, p=50.0,
                    variant="fista")
        base.update(kw)
        return cls(**base)

    def frozen(self) -> "HgdConfig":
        """Same config with every meta rate set to zero."""
        return replace(self, eta_r=0.0, eta_x=0.0, eta_gamma=0.0,
                       eta_z=0.0 if self.variant == "fista" else None)

    def initial_params(self, prob) -> StructuralParams:
        if self.init_params is not None:
            return self.init_params
        return StructuralParams.canonical(default_gamma(prob.A), fista=self.variant == "fista")


@dataclass
class RunTrace:
    """Per-iteration record of one run; row ``t`` describes iteration ``t``.

    ``mse[t]`` is ``||estimate_{t+1} - x_star||^2`` for this signal (averaging
    over signals gives the reported MSE).  Weight and beta arrays have shape
    ``(T, 3, 2)`` over slots ``(r, x, z)``; the ``z`` slot is NaN for ISTA.
    ``hypergrads`` has shape ``(T, 7)`` in ``PARAM_IDS`` order.
    """

    variant: str
    mse: np.ndarray
    objective: np.ndarray
    surrogate: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    soft_w: np.ndarray
    hard_w: np.ndarray
    hypergrads: np.ndarray
    initial_mse: float
    initial_objective: float
    final: np.ndarray = field(repr=False)
    final_params: Optional[StructuralParams] = None

    @property
    def T(self) -> int:
        return len(self.mse)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.T)

    def mse_with_initial(self) -> np.ndarray:
        return np.concatenate([[self.initial_mse], self.mse])

    @classmethod
    def empty(cls, variant: str, T: int, N: int) -> "RunTrace":
        nan = lambda *shape: np.full(shape, np.nan)  # noqa: E731
        return cls(variant, nan(T), nan(T), nan(T), nan(T), nan(T, 3, 2), nan(T, 3, 2),
                   nan(T, 3, 2), nan(T, 7), np.nan, np.nan, np.zeros(N))

    @classmethod
    def from_classic(cls, ct: ClassicTrace, prob, p: float = 50.0) -> "RunTrace":
        """Wrap a fixed ISTA/FISTA run with its implied one-hot architecture."""
        T = ct.T
        tr = cls.empty(ct.variant, T, prob.N)
        est = ct.iterates[1:]
        tr.mse[:] = ct.sq_error[1:]
        tr.objective[:] = ct.objective[1:]
        tr.surrogate[:] = [surrogate_objective(v, prob, p) for v in est]
        tr.gamma[:] = ct.gamma
        fixed = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        if ct.variant == "ista":
            fixed[2] = np.nan
        tr.soft_w[:] = fixed
        tr.hard_w[:] = fixed
        tr.initial_mse = float(ct.sq_error[0])
        tr.initial_objective = float(ct.objective[0])
        tr.final = ct.iterates[-1]
        return tr


def _record(tr: RunTrace, t: int, state: SolverState, params: StructuralParams,
            weights, hg: HypergradSet, prob, p: float):
    est = state.estimate
    tr.mse[t] = float(np.sum((est - prob.x_star) ** 2))
    tr.objective[t] = objective(est, prob)
    tr.surrogate[t] = surrogate_objective(est, prob, p)
    tr.gamma[t] = params.gamma
    tr.beta[t, 0] = params.beta_r
    tr.beta[t, 1] = params.beta_x
    tr.soft_w[t, 0], tr.soft_w[t, 1] = weights.soft_r, weights.soft_x
    tr.hard_w[t, 0], tr.hard_w[t, 1] = weights.hard_r, weights.hard_x
    if params.beta_z is not None:
        tr.beta[t, 2] = params.beta_z
        tr.soft_w[t, 2], tr.hard_w[t, 2] = weights.soft_z, weights.hard_z
    tr.hypergrads[t] = hg.as_array()


def _updated(params: StructuralParams, hg: HypergradSet, cfg: HgdConfig) -> StructuralParams:
    def pair(beta, grads, eta):
        return (hgd_update(beta[0], grads[0], eta), hgd_update(beta[1], grads[1], eta))

    return StructuralParams(
        beta_r=pair(params.beta_r, hg.d_beta_r, cfg.eta_r),
        beta_x=pair(params.beta_x, hg.d_beta_x, cfg.eta_x),
        gamma=hgd_update(params.gamma, hg.d_gamma, cfg.eta_gamma, floor=cfg.gamma_min),
        beta_z=pair(params.beta_z, hg.d_beta_z, cfg.eta_z) if params.beta_z is not None else None,
    )


def run_hgd(prob, cfg: HgdConfig, x0=None):
    """Online loop for either variant; returns ``(estimate_T, trace)``.

    Raises :class:`SolverDivergence` on the first non-finite iterate,
    hypergradient or parameter.
    """
    fista = cfg.variant == "fista"
    params = cfg.initial_params(prob)
    x0 = np.zeros(prob.N) if x0 is None else np.asarray(x0, dtype=float)
    state = SolverState.initial(x0, fista=fista)
    step = as_fista_step if fista else as_ista_step

    tr = RunTrace.empty(cfg.variant, cfg.T, prob.N)
    tr.initial_mse = float(np.sum((x0 - prob.x_star) ** 2))
    tr.initial_objective = objective(x0, prob)

    # overflow is detected explicitly below; keep numpy quiet about it
    with np.errstate(over="ignore", invalid="ignore"):
        return _loop(prob, cfg, params, state, step, tr, fista)


def _loop(prob, cfg, params, state, step, tr, fista):
    for t in range(cfg.T):
        weights = step_weights(params)
        state = step(state, params, prob, mode="hard", weights=weights)
        if not np.all(np.isfinite(state.estimate)):
            raise SolverDivergence(t, "iterate")
        hg = hypergradients(state, params, prob, cfg.p)
        if not hg.is_finite():
            raise SolverDivergence(t, "hypergradient")
        _record(tr, t, state, params, weights, hg, prob, cfg.p)
        try:
            params = _updated(params, hg, cfg)
        except (FloatingPointError, ValueError) as exc:
            raise SolverDivergence(t, "parameter") from exc
        state = state.advance()

    est = state.z_t if fista else state.x_t
    tr.final = est
    tr.final_params = params
    return est, tr


def hgd_as_ista(prob, cfg: HgdConfig, x0=None):
    if cfg.variant != "ista":
        raise ValueError("hgd_as_ista needs cfg.variant == 'ista'")
    return run_hgd(prob, cfg, x0)


def hgd_as_fista(prob, cfg: HgdConfig, x0=None):
    if cfg.variant != "fista":
        raise ValueError("hgd_as_fista needs cfg.variant == 'fista'")
    return run_hgd(prob, cfg, x0)
