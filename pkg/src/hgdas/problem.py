"""Seeded compressed-sensing problem instances.

Every random draw goes through numpy's ``PCG64`` bit generator seeded from a
``SeedSequence``.  Matrix, signal and noise draws use independent child
streams so that, e.g., changing the noise level never changes the matrix.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "ConfigError",
    "GeneratorConfig",
    "ProblemInstance",
    "MATRIX_KINDS",
    "rng_from",
    "instance_streams",
    "generate_signal",
    "generate_matrix",
    "generate_noise",
    "make_instance",
    "build_instance",
]

MATRIX_KINDS = ("iid_gaussian", "correlated_gaussian")

# Child stream indices under one seed.
_MATRIX, _SIGNAL, _NOISE = 0, 1, 2


class ConfigError(ValueError):
    """Raised for out-of-range configuration values."""


@dataclass(frozen=True)
class GeneratorConfig:
    """Description of a random LASSO instance family.

    ``noise_variance`` is the per-entry variance of the additive noise.
    ``rho`` is only read when ``matrix_kind == "correlated_gaussian"``.
    """

    M: int = 75
    N: int = 150
    nonzero_ratio: float = 0.08
    signal_variance: float = 1.0
    noise_variance: float = 0.1
    matrix_kind: str = "iid_gaussian"
    rho: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.M) != self.M or int(self.N) != self.N or self.M < 1 or self.N < 1:
            raise ConfigError(f"M and N must be positive integers, got M={self.M}, N={self.N}")
        if not self.M < self.N:
            raise ConfigError(f"need M < N, got M={self.M}, N={self.N}")
        if not 0.0 < self.nonzero_ratio < 1.0:
            raise ConfigError(f"nonzero_ratio must lie in (0, 1), got {self.nonzero_ratio}")
        if not self.signal_variance > 0:
            raise ConfigError(f"signal_variance must be positive, got {self.signal_variance}")
        if not self.noise_variance >= 0:
            raise ConfigError(f"noise_variance must be nonnegative, got {self.noise_variance}")
        if self.matrix_kind not in MATRIX_KINDS:
            raise ConfigError(f"matrix_kind must be one of {MATRIX_KINDS}, got {self.matrix_kind!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError(f"rho must lie in [0, 1), got {self.rho}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown generator keys: {sorted(extra)}")
        kw = dict(d)
        for key in ("M", "N", "seed"):
            if key in kw:
                kw[key] = int(kw[key])
        for key in ("nonzero_ratio", "signal_variance", "noise_variance", "rho"):
            if key in kw:
                kw[key] = float(kw[key])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One LASSO problem ``min 0.5*||y - A x||^2 + lam*||x||_1``.

    ``noise`` is kept so that ``y == A @ x_star + noise`` can be audited.
    """

    A: np.ndarray
    y: np.ndarray
    x_star: np.ndarray
    lam: float
    noise: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a 2-D array")
        M, N = A.shape
        if self.y.shape != (M,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({M},)")
        if self.x_star.shape != (N,):
            raise ValueError(f"x_star has shape {self.x_star.shape}, expected ({N},)")
        if not M < N:
            raise ValueError(f"need M < N, got {A.shape}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def with_lambda(self, lam: float) -> "ProblemInstance":
        return ProblemInstance(self.A, self.y, self.x_star, lam, self.noise)


def rng_from(entropy, *key: int) -> np.random.Generator:
    """PCG64 generator for the sub-stream ``key`` of ``entropy``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=key)))


def instance_streams(seed: int):
    """Independent (matrix, signal, noise) generators for one seed."""
    return tuple(rng_from(seed, k) for k in (_MATRIX, _SIGNAL, _NOISE))


def generate_signal(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli-Gaussian vector of length ``cfg.N``."""
    support = rng.random(cfg.N) < cfg.nonzero_ratio
    values = rng.normal(0.0, np.sqrt(cfg.signal_variance), size=cfg.N)
    return np.where(support, values, 0.0)


def _toeplitz_sqrt(N: int, rho: float) -> np.ndarray:
    idx = np.arange(N)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    evals, evecs = np.linalg.eigh(cov)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


def generate_matrix(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Gaussian measurement matrix.

    For ``correlated_gaussian`` the rows are independent and each row has
    covariance ``rho**|j - l|`` across columns (``A = G @ sqrtm(Sigma)``).
    """
    G = rng.standard_normal((cfg.M, cfg.N))
    if cfg.matrix_kind == "iid_gaussian" or cfg.rho == 0.0:
        return G
    return G @ _toeplitz_sqrt(cfg.N, cfg.rho)


def generate_noise(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(cfg.noise_variance), size=cfg.M)


def make_instance(A, x_star, noise, lam: float) -> ProblemInstance:
    A = np.asarray(A, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    noise = np.asarray(noise, dtype=float)
    return ProblemInstance(A, A @ x_star + noise, x_star, float(lam), noise)


def build_instance(cfg: GeneratorConfig, lam: float) -> ProblemInstance:
    """Draw ``A``, ``x_star`` and noise from ``cfg.seed`` and assemble ``y``."""
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    rng_A, rng_x, rng_v = instance_streams(cfg.seed)
    A = generate_matrix(cfg, rng_A)
    x_star = generate_signal(cfg, rng_x)
    return make_instance(A, x_star, generate_noise(cfg, rng_v), lam)
