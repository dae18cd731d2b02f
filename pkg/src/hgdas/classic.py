"""Fixed-step ISTA and FISTA baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .smooth import objective, soft_threshold

__all__ = [
    "ClassicTrace",
    "spectral_norm_sq",
    "default_gamma",
    "gradient_step",
    "shrink_step",
    "next_momentum",
    "ista",
    "fista",
]


@dataclass
class ClassicTrace:
    """Per-iteration record of a fixed-parameter run, initial point included.

    ``iterates[t]`` is the estimate after ``t`` iterations (``z`` for FISTA).
    """

    iterates: np.ndarray
    objective: np.ndarray
    sq_error: np.ndarray
    gamma: float
    variant: str

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.objective))

    @property
    def T(self) -> int:
        return len(self.objective) - 1


def spectral_norm_sq(A, maxiter: int = 500, rtol: float = 1e-12) -> float:
    """Largest eigenvalue of ``A.T @ A`` (squared spectral norm) by power iteration.

    Starts from the all-ones vector, so the result is deterministic.
    """
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        raise ValueError("spectral norm of a zero matrix is undefined here")
    v = np.ones(A.shape[1]) / math.sqrt(A.shape[1])
    est = 0.0
    for _ in range(maxiter):
        w = A @ v
        new = float(w @ w)
        u = A.T @ w
        norm = np.linalg.norm(u)
        if norm == 0.0:
            # all-ones start orthogonal to the row space; restart off-axis
            v = np.arange(1.0, A.shape[1] + 1.0)
            v /= np.linalg.norm(v)
            continue
        v = u / norm
        if est > 0 and abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    # one Rayleigh quotient at the final vector
    w = A @ v
    return max(est, float(w @ w))


def default_gamma(A) -> float:
    """Step ``1 / s_max**2``."""
    return 1.0 / spectral_norm_sq(A)


def gradient_step(v, prob, gamma):
    """``v - gamma * A^T (A v - y)``."""
    return v - gamma * (prob.A.T @ (prob.A @ v - prob.y))


def shrink_step(v, prob, gamma):
    return soft_threshold(v, gamma * prob.lam)


def next_momentum(s: float) -> float:
    return (1.0 + math.sqrt(1.0 + 4.0 * s * s)) / 2.0


def _init(prob, x0):
    x = np.zeros(prob.N) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (prob.N,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({prob.N},)")
    return x


def _trace(iterates, prob, gamma, variant):
    its = np.array(iterates)
    obj = np.array([objective(v, prob) for v in its])
    err = np.sum((its - prob.x_star) ** 2, axis=1)
    return ClassicTrace(its, obj, err, gamma, variant)


def ista(prob, gamma: float, T: int, x0=None):
    """Run ``T`` ISTA iterations; returns ``(x_T, trace)``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    x = _init(prob, x0)
    iterates = [x]
    for _ in range(T):
        r = gradient_step(x, prob, gamma)
        x = shrink_step(r, prob, gamma)
        iterates.append(x)
    return x, _trace(iterates, prob, gamma, "ista")


def fista(prob, gamma: float, T: int, x0=None, momentum: bool = True):
    """Run ``T`` FISTA iterations; returns ``(z_T, trace)``.

    The gradient step is taken at the extrapolated point ``z``.  With
    ``momentum=False`` the extrapolation is skipped and the run equals ISTA.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    x = _init(prob, x0)
    z = x
    s = 1.0
    iterates = [z]
    for _ in range(T):
        r = gradient_step(z, prob, gamma)
        x_next = shrink_step(r, prob, gamma)
        s_next = next_momentum(s)
        if momentum:
            z = x_next + ((s - 1.0) / s_next) * (x_next - x)
        else:
            z = x_next
        x, s = x_next, s_next
        iterates.append(z)
    return z, _trace(iterates, prob, gamma, "fista")
