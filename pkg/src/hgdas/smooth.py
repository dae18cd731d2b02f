"""Shrinkage kernels, their smooth surrogates, and the LASSO objectives.

All kernels act elementwise on arrays.  Softplus terms are evaluated with
``np.logaddexp(0, a)`` so that ``|p*q|`` in the thousands stays finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "SmoothingConfig",
    "softplus",
    "sigmoid",
    "soft_threshold",
    "smooth_soft_threshold",
    "smooth_soft_threshold_dq",
    "smooth_soft_threshold_dtau",
    "smooth_l1",
    "smooth_l1_grad",
    "objective",
    "surrogate_objective",
    "surrogate_gradient",
]

LOG2 = np.log(2.0)


@dataclass(frozen=True)
class SmoothingConfig:
    p: float = 50.0

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"smoothing p must be positive, got {self.p}")


def softplus(a):
    return np.logaddexp(0.0, a)


def sigmoid(q):
    return expit(q)


def soft_threshold(q, tau):
    """``sign(q) * max(|q| - tau, 0)``."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be nonnegative")
    return np.sign(q) * np.maximum(np.abs(q) - tau, 0.0)


def smooth_soft_threshold(q, tau, p):
    """Softplus-difference approximation of :func:`soft_threshold`.

    ``(softplus(p*(q - tau)) - softplus(p*(-q - tau))) / p``; odd in ``q`` and
    within ``2*log(2)/p`` of the exact shrinkage everywhere.
    """
    q = np.asarray(q, dtype=float)
    return (softplus(p * (q - tau)) - softplus(p * (-q - tau))) / p


def smooth_soft_threshold_dq(q, tau, p):
    q = np.asarray(q, dtype=float)
    return sigmoid(p * (q - tau)) + sigmoid(p * (-q - tau))


def smooth_soft_threshold_dtau(q, tau, p):
    q = np.asarray(q, dtype=float)
    return sigmoid(p * (-q - tau)) - sigmoid(p * (q - tau))


def smooth_l1(x, p) -> float:
    """Smoothed l1 norm ``sum((softplus(p x) + softplus(-p x) - 2 log 2) / p)``."""
    x = np.asarray(x, dtype=float)
    px = p * x
    return float(np.sum((softplus(px) + softplus(-px) - 2.0 * LOG2) / p))


def smooth_l1_grad(x, p):
    return 2.0 * sigmoid(p * np.asarray(x, dtype=float)) - 1.0


def _residual(x, prob):
    x = np.asarray(x, dtype=float)
    if x.shape != (prob.N,):
        raise ValueError(f"x has shape {x.shape}, expected ({prob.N},)")
    return prob.A @ x - prob.y


def objective(x, prob) -> float:
    """Exact LASSO objective ``0.5*||y - A x||^2 + lam*||x||_1``."""
    res = _residual(x, prob)
    return 0.5 * float(res @ res) + prob.lam * float(np.sum(np.abs(x)))


def surrogate_objective(x, prob, p) -> float:
    res = _residual(x, prob)
    return 0.5 * float(res @ res) + prob.lam * smooth_l1(x, p)


def surrogate_gradient(x, prob, p):
    """``A^T (A x - y) + lam * (2*sigmoid(p x) - 1)``."""
    res = _residual(x, prob)
    return prob.A.T @ res + prob.lam * smooth_l1_grad(x, p)
