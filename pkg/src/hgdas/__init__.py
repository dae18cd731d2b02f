"""ISTA/FISTA and their online architecture-searched variants.

The online variants pick, at every iteration, whether each slot of the
iteration is a gradient step, a shrinkage or a momentum extrapolation, and
adapt those choices together with the step size by hypergradient descent on
a smoothed LASSO objective, without any offline training.
"""

from .arch import SolverState, StructuralParams, as_fista_step, as_ista_step, softmax_weights
from .classic import default_gamma, fista, ista, spectral_norm_sq
from .config import ExperimentConfig, load_config
from .gradcheck import run_gradcheck
from .harness import heatmap_matrix, run_experiment, ste_bias_stats, timing_report
from .hypergrad import PARAM_IDS, HypergradSet, fd_hypergradient, hypergradients
from .problem import GeneratorConfig, ProblemInstance, build_instance
from .solver import HgdConfig, RunTrace, hgd_as_fista, hgd_as_ista

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "GeneratorConfig",
    "HgdConfig",
    "HypergradSet",
    "PARAM_IDS",
    "ProblemInstance",
    "RunTrace",
    "SolverState",
    "StructuralParams",
    "as_fista_step",
    "as_ista_step",
    "build_instance",
    "default_gamma",
    "fd_hypergradient",
    "fista",
    "heatmap_matrix",
    "hgd_as_fista",
    "hgd_as_ista",
    "hypergradients",
    "ista",
    "load_config",
    "run_experiment",
    "run_gradcheck",
    "softmax_weights",
    "spectral_norm_sq",
    "ste_bias_stats",
    "timing_report",
]
