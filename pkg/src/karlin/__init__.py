"""Simulation and verification toolkit for randomized infinite
occupancy schemes and their self-similar Gaussian limits.

Submodules:
  weights     regularly varying box probabilities and summary functions
  urn         label sampling, deterministic signs, discrete path engine
  poisson     Poissonized paths, exact covariances, de-Poissonization gaps
  kernels     limit covariance kernels and Gaussian-process sampling
  montecarlo  replicated runs, covariance estimation, KS diagnostics
  verify      named statistical verification suites
  cli         command-line front end (`karlin ...`)
"""

from .errors import DomainError, NotPsdError, QuadratureError
from .kernels import (
    KERNEL_FAMILIES,
    CovMatrix,
    KernelSpec,
    chol_psd,
    cov_matrix,
    kernel_eval,
    min_eig,
    sample_gp,
)
from .montecarlo import (
    KsResult,
    McConfig,
    McResult,
    convergence_report,
    empirical_cov,
    ks_normality,
    run_mc,
)
from .poisson import depoisson_gap, exact_cov, simulate_poissonized
from .urn import PathGrid, SignSource, correlated_walk, make_grid, sample_labels, simulate_discrete
from .verify import SUITES, run_suite
from .weights import WeightSequence, big_v, make_weights, nu_count, sigma2

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "NotPsdError",
    "QuadratureError",
    "KERNEL_FAMILIES",
    "CovMatrix",
    "KernelSpec",
    "chol_psd",
    "cov_matrix",
    "kernel_eval",
    "min_eig",
    "sample_gp",
    "KsResult",
    "McConfig",
    "McResult",
    "convergence_report",
    "empirical_cov",
    "ks_normality",
    "run_mc",
    "depoisson_gap",
    "exact_cov",
    "simulate_poissonized",
    "PathGrid",
    "SignSource",
    "correlated_walk",
    "make_grid",
    "sample_labels",
    "simulate_discrete",
    "SUITES",
    "run_suite",
    "WeightSequence",
    "big_v",
    "make_weights",
    "nu_count",
    "sigma2",
    "__version__",
]
