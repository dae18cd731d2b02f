"""Architecture-searched ISTA/FISTA steps.

Each step has two selection slots for ISTA (``r`` and ``x``) and a third for
FISTA (``z``).  A slot mixes two candidate operations with softmax weights of
a pair of structural parameters:

* ``r``: ``w_r1 * f(x) + w_r2 * g(x)``
* ``x``: ``w_x1 * f(r) + w_x2 * g(r)``
* ``z``: ``w_z1 * h(x_next, x, s_next, s) + w_z2 * x_next``

with ``f`` the gradient step, ``g`` the shrinkage and ``h`` the momentum
extrapolation.  In ``"hard"`` mode the weights are rounded to one-hot and the
exact shrinkage is used; ``"soft"`` mode keeps the softmax weights and uses
the smoothed shrinkage, giving a differentiable map for gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .classic import gradient_step, next_momentum, shrink_step
from .smooth import smooth_soft_threshold

__all__ = [
    "StructuralParams",
    "StepWeights",
    "SolverState",
    "softmax_weights",
    "round_weights",
    "step_weights",
    "f_step",
    "g_step",
    "g_smooth",
    "momentum_point",
    "as_ista_step",
    "as_fista_step",
]

Pair = Tuple[float, float]


@dataclass(frozen=True)
class StructuralParams:
    """Online-adapted parameters of one iteration."""

    beta_r: Pair
    beta_x: Pair
    gamma: float
    beta_z: Optional[Pair] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        pairs = [self.beta_r, self.beta_x] + ([self.beta_z] if self.beta_z is not None else [])
        for pair in pairs:
            if len(pair) != 2 or not np.all(np.isfinite(pair)):
                raise ValueError(f"structural parameters must be finite pairs, got {pair}")

    @classmethod
    def canonical(cls, gamma: float, fista: bool = False) -> "StructuralParams":
        """Parameters whose rounded weights select plain ISTA (or FISTA)."""
        return cls(
            beta_r=(1.0, -1.0),
            beta_x=(-1.0, 1.0),
            gamma=float(gamma),
            beta_z=(1.0, -1.0) if fista else None,
        )

    @property
    def is_fista(self) -> bool:
        return self.beta_z is not None

    def with_(self, **kw) -> "StructuralParams":
        return replace(self, **kw)


def softmax_weights(beta) -> np.ndarray:
    b = np.asarray(beta, dtype=float)
    e = np.exp(b - b.max())
    return e / e.sum()


def round_weights(soft) -> np.ndarray:
    """One-hot of the larger weight; a tie picks the first operation."""
    soft = np.asarray(soft, dtype=float)
    return np.array([1.0, 0.0]) if soft[0] >= soft[1] else np.array([0.0, 1.0])


@dataclass(frozen=True)
class StepWeights:
    soft_r: np.ndarray
    soft_x: np.ndarray
    hard_r: np.ndarray
    hard_x: np.ndarray
    soft_z: Optional[np.ndarray] = None
    hard_z: Optional[np.ndarray] = None

    def pick(self, mode: str):
        """``(w_r, w_x, w_z)`` for the given forward mode."""
        if mode == "hard":
            return self.hard_r, self.hard_x, self.hard_z
        if mode == "soft":
            return self.soft_r, self.soft_x, self.soft_z
        raise ValueError(f"mode must be 'hard' or 'soft', got {mode!r}")


def step_weights(params: StructuralParams) -> StepWeights:
    sr, sx = softmax_weights(params.beta_r), softmax_weights(params.beta_x)
    sz = softmax_weights(params.beta_z) if params.beta_z is not None else None
    return StepWeights(
        soft_r=sr,
        soft_x=sx,
        hard_r=round_weights(sr),
        hard_x=round_weights(sx),
        soft_z=sz,
        hard_z=round_weights(sz) if sz is not None else None,
    )


@dataclass
class SolverState:
    """Iterates touched by iteration ``t``.

    Before a step only the inputs are set: ``x_t`` (plus ``z_t`` and ``s_t``
    for FISTA).  The step fills ``r_t`` and ``x_next`` (plus ``z_next`` and
    ``s_next``).  For FISTA the gradient/shrinkage slots read ``z_t`` and
    ``x_t`` is the previous ``x`` used by the momentum term.
    """

    t: int
    x_t: np.ndarray
    r_t: Optional[np.ndarray] = None
    x_next: Optional[np.ndarray] = None
    z_t: Optional[np.ndarray] = None
    z_next: Optional[np.ndarray] = None
    s_t: Optional[float] = None
    s_next: Optional[float] = None

    @classmethod
    def initial(cls, x0, fista: bool = False) -> "SolverState":
        x0 = np.asarray(x0, dtype=float)
        if fista:
            return cls(t=0, x_t=x0, z_t=x0, s_t=1.0)
        return cls(t=0, x_t=x0)

    @property
    def is_fista(self) -> bool:
        return self.s_t is not None

    @property
    def step_input(self) -> np.ndarray:
        """Vector the ``r`` slot acts on (``z_t`` for FISTA)."""
        return self.z_t if self.is_fista else self.x_t

    @property
    def estimate(self) -> np.ndarray:
        return self.z_next if self.is_fista else self.x_next

    def advance(self) -> "SolverState":
        if self.x_next is None:
            raise ValueError("state has not been stepped")
        if self.is_fista:
            return SolverState(t=self.t + 1, x_t=self.x_next, z_t=self.z_next, s_t=self.s_next)
        return SolverState(t=self.t + 1, x_t=self.x_next)


def f_step(v, prob, gamma):
    return gradient_step(v, prob, gamma)


def g_step(v, prob, gamma):
    return shrink_step(v, prob, gamma)


def g_smooth(v, prob, gamma, p):
    return smooth_soft_threshold(v, gamma * prob.lam, p)


def _slot(w, v, prob, gamma, mode, p):
    if mode == "hard":
        # one-hot: evaluate only the selected branch
        return f_step(v, prob, gamma) if w[0] == 1.0 else g_step(v, prob, gamma)
    return w[0] * f_step(v, prob, gamma) + w[1] * g_smooth(v, prob, gamma, p)


def _check_mode(mode, p):
    if mode not in ("hard", "soft"):
        raise ValueError(f"mode must be 'hard' or 'soft', got {mode!r}")
    if mode == "soft" and p is None:
        raise ValueError("soft mode needs a smoothing parameter p")


def momentum_point(x_next, x_t, s_next, s_t):
    """``x_next + ((s_t - 1) / s_next) * (x_next - x_t)``."""
    return x_next + ((s_t - 1.0) / s_next) * (x_next - x_t)


def _ista_core(state, params, prob, mode, p, weights):
    w_r, w_x, _ = weights.pick(mode)
    v = state.step_input
    r = _slot(w_r, v, prob, params.gamma, mode, p)
    x_next = _slot(w_x, r, prob, params.gamma, mode, p)
    return r, x_next


def as_ista_step(state: SolverState, params: StructuralParams, prob, mode: str = "hard",
                 p: Optional[float] = None, weights: Optional[StepWeights] = None) -> SolverState:
    """One AS-ISTA iteration from ``state.x_t``; returns the filled state."""
    _check_mode(mode, p)
    if state.x_t is None:
        raise ValueError("state has no x_t")
    weights = weights or step_weights(params)
    r, x_next = _ista_core(state, params, prob, mode, p, weights)
    return SolverState(t=state.t, x_t=state.x_t, r_t=r, x_next=x_next)


def as_fista_step(state: SolverState, params: StructuralParams, prob, mode: str = "hard",
                  p: Optional[float] = None, weights: Optional[StepWeights] = None) -> SolverState:
    """One AS-FISTA iteration: AS-ISTA slots on ``z_t`` then the ``z`` slot."""
    _check_mode(mode, p)
    if state.z_t is None or state.s_t is None:
        raise ValueError("AS-FISTA step needs z_t and s_t in the state")
    if params.beta_z is None:
        raise ValueError("AS-FISTA step needs beta_z")
    weights = weights or step_weights(params)
    r, x_next = _ista_core(state, params, prob, mode, p, weights)
    s_next = next_momentum(state.s_t)
    _, _, w_z = weights.pick(mode)
    if mode == "hard":
        if w_z[0] == 1.0:
            z_next = momentum_point(x_next, state.x_t, s_next, state.s_t)
        else:
            z_next = x_next
    else:
        # w_z1*h + w_z2*x_next with w_z1 + w_z2 = 1; this form keeps z_next
        # exactly flat in beta_z when the momentum coefficient is zero
        z_next = x_next + w_z[0] * ((state.s_t - 1.0) / s_next) * (x_next - state.x_t)
    return SolverState(t=state.t, x_t=state.x_t, r_t=r, x_next=x_next,
                       z_t=state.z_t, z_next=z_next, s_t=state.s_t, s_next=s_next)
