"""Closed-form one-step hypergradients and their finite-difference oracle.

The hypergradient of a parameter ``a`` of iteration ``t`` is
``dJs(x_next)/da`` (``dJs(z_next)/da`` for FISTA), where ``Js`` is the
smoothed LASSO objective and only iteration ``t`` is differentiated.

Straight-through convention: the stored iterates come from whatever forward
pass produced ``state`` (normally the hard one), while every weight inside the
derivative is the softmax value and every shrinkage is the smoothed one.

Only matrix-vector products with ``A`` and ``A.T`` are used, so one full set
costs ``O(M N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .arch import (
    SolverState,
    StructuralParams,
    as_fista_step,
    as_ista_step,
    momentum_point,
    step_weights,
)
from .smooth import (
    sigmoid,
    smooth_soft_threshold,
    surrogate_gradient,
    surrogate_objective,
)

__all__ = [
    "HypergradSet",
    "PARAM_IDS",
    "hypergradients",
    "hypergrad_gamma_ista",
    "hypergrad_beta_r_ista",
    "hypergrad_beta_x_ista",
    "hypergrad_all_fista",
    "fista_chain_factor",
    "central_difference",
    "fd_hypergradient",
    "default_delta",
    "perturb",
    "soft_forward",
]

PARAM_IDS = ("gamma", "beta_r1", "beta_r2", "beta_x1", "beta_x2", "beta_z1", "beta_z2")


@dataclass(frozen=True)
class HypergradSet:
    d_gamma: float
    d_beta_r: Tuple[float, float]
    d_beta_x: Tuple[float, float]
    d_beta_z: Optional[Tuple[float, float]] = None

    def get(self, alpha_id: str) -> float:
        if alpha_id == "gamma":
            return self.d_gamma
        name, k = alpha_id[:-1], int(alpha_id[-1]) - 1
        pair = {"beta_r": self.d_beta_r, "beta_x": self.d_beta_x, "beta_z": self.d_beta_z}[name]
        if pair is None:
            raise KeyError(f"{alpha_id} not present in an ISTA hypergradient set")
        return pair[k]

    def as_array(self) -> np.ndarray:
        z = self.d_beta_z if self.d_beta_z is not None else (np.nan, np.nan)
        return np.array([self.d_gamma, *self.d_beta_r, *self.d_beta_x, *z])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_array()[: 5 if self.d_beta_z is None else 7])))


def _pair(g1: float) -> Tuple[float, float]:
    g1 = float(g1)
    return (g1, -g1)


def fista_chain_factor(w_z, s_t: float, s_next: float) -> float:
    """Scalar ``dz_next/dx_next`` of the ``z`` slot."""
    return w_z[0] * (s_next + s_t - 1.0) / s_next + w_z[1]


def _require(state: SolverState, fista: bool):
    if state.x_t is None or state.r_t is None or state.x_next is None:
        raise ValueError("state must hold x_t, r_t and x_next from a completed step")
    if fista and (state.z_t is None or state.z_next is None
                  or state.s_t is None or state.s_next is None):
        raise ValueError("FISTA hypergradients need z_t, z_next, s_t and s_next")


def hypergradients(state: SolverState, params: StructuralParams, prob, p: float) -> HypergradSet:
    """All hypergradients of one completed step.

    Dispatches on the state: FISTA if it carries momentum, ISTA otherwise.
    """
    fista = state.is_fista
    _require(state, fista)
    if fista and params.beta_z is None:
        raise ValueError("FISTA state needs params.beta_z")
    A, y, lam = prob.A, prob.y, prob.lam
    gamma = params.gamma
    tau = gamma * lam
    w = step_weights(params)
    wr1, wr2 = w.soft_r
    wx1, wx2 = w.soft_x

    v = state.step_input
    r = state.r_t

    # r slot
    grad_v = A.T @ (A @ v - y)
    f_v = v - gamma * grad_v
    gs_v = smooth_soft_threshold(v, tau, p)
    dr_dgamma = -wr1 * grad_v + wr2 * lam * (sigmoid(p * (-v - tau)) - sigmoid(p * (v - tau)))
    dr_dbeta_r1 = wr1 * wr2 * (f_v - gs_v)

    # x slot
    grad_r = A.T @ (A @ r - y)
    f_r = r - gamma * grad_r
    gs_r = smooth_soft_threshold(r, tau, p)
    sig_plus = sigmoid(p * (r - tau))
    sig_minus = sigmoid(p * (-r - tau))
    dg_dr = sig_plus + sig_minus
    dx_dgamma_direct = -wx1 * grad_r + wx2 * lam * (sig_minus - sig_plus)
    dx_dbeta_x1 = wx1 * wx2 * (f_r - gs_r)

    # outer gradient u = dJs/dx_next
    if fista:
        wz1, wz2 = w.soft_z
        g_out = surrogate_gradient(state.z_next, prob, p)
        u = fista_chain_factor(w.soft_z, state.s_t, state.s_next) * g_out
        dz_dbeta_z1 = wz1 * wz2 * ((state.s_t - 1.0) / state.s_next) * (state.x_next - state.x_t)
        d_beta_z = _pair(g_out @ dz_dbeta_z1)
    else:
        u = surrogate_gradient(state.x_next, prob, p)
        d_beta_z = None

    # u^T dx_next/dr, evaluated as a row vector: u - gamma * (u^T A^T) A
    back = wx1 * (u - gamma * (A.T @ (A @ u))) + wx2 * dg_dr * u

    d_gamma = float(u @ dx_dgamma_direct + back @ dr_dgamma)
    return HypergradSet(
        d_gamma=d_gamma,
        d_beta_r=_pair(back @ dr_dbeta_r1),
        d_beta_x=_pair(u @ dx_dbeta_x1),
        d_beta_z=d_beta_z,
    )


def hypergrad_gamma_ista(state, params, prob, p) -> float:
    return hypergradients(state, params, prob, p).d_gamma


def hypergrad_beta_r_ista(state, params, prob, p) -> Tuple[float, float]:
    return hypergradients(state, params, prob, p).d_beta_r


def hypergrad_beta_x_ista(state, params, prob, p) -> Tuple[float, float]:
    return hypergradients(state, params, prob, p).d_beta_x


def hypergrad_all_fista(state, params, prob, p) -> HypergradSet:
    if not state.is_fista:
        raise ValueError("state carries no momentum; use hypergradients() for ISTA")
    return hypergradients(state, params, prob, p)


# -- finite-difference oracle -------------------------------------------------

def central_difference(fun: Callable[[float], float], a0: float, delta: float) -> float:
    """``(fun(a0 + delta) - fun(a0 - delta)) / (2 delta)``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return (fun(a0 + delta) - fun(a0 - delta)) / (2.0 * delta)


def default_delta(alpha_id: str, params: StructuralParams) -> float:
    if alpha_id == "gamma":
        return 1e-5 * params.gamma
    if alpha_id.startswith("beta_z"):
        # z is affine in its weights; a wider step only lowers roundoff
        return 1e-5
    return 1e-6


def perturb(params: StructuralParams, alpha_id: str, value: float) -> StructuralParams:
    """Copy of ``params`` with one scalar replaced."""
    if alpha_id == "gamma":
        return params.with_(gamma=value)
    name, k = alpha_id[:-1], int(alpha_id[-1]) - 1
    pair = list(getattr(params, name))
    pair[k] = value
    return params.with_(**{name: tuple(pair)})


def _value(params: StructuralParams, alpha_id: str) -> float:
    if alpha_id == "gamma":
        return params.gamma
    return getattr(params, alpha_id[:-1])[int(alpha_id[-1]) - 1]


def soft_forward(state: SolverState, params: StructuralParams, prob, p: float) -> SolverState:
    """Soft-mode step from the pre-step inputs of ``state``."""
    pre = SolverState(t=state.t, x_t=state.x_t, z_t=state.z_t, s_t=state.s_t)
    if state.is_fista:
        return as_fista_step(pre, params, prob, mode="soft", p=p)
    return as_ista_step(pre, params, prob, mode="soft", p=p)


def fd_hypergradient(alpha_id: str, state: SolverState, params: StructuralParams, prob,
                     p: float, delta: Optional[float] = None) -> float:
    """Central difference of ``Js`` after one soft-mode step, in one parameter.

    Only the pre-step inputs of ``state`` are read, so the result is the
    derivative of exactly the map the closed forms differentiate.
    """
    if alpha_id not in PARAM_IDS:
        raise ValueError(f"unknown parameter id {alpha_id!r}")
    if alpha_id.startswith("beta_z") and not state.is_fista:
        raise ValueError("beta_z only exists for FISTA states")
    if delta is None:
        delta = default_delta(alpha_id, params)
    if not delta > 0:
        raise ValueError("delta must be positive")

    def J(a):
        out = soft_forward(state, perturb(params, alpha_id, a), prob, p)
        return surrogate_objective(out.estimate, prob, p)

    return central_difference(J, _value(params, alpha_id), delta)
