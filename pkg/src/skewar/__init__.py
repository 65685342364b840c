"""Recursive identification of AR models with skew-normal innovations.

The main entry points are :func:`filter_skew` (the skew-normal variational
Bayes identifier), :func:`filter_gaussian` (its normal-innovation
counterpart) and :func:`run_benchmark` (Monte Carlo comparison of the two).
"""

__version__ = "0.1.0"

from .baseline import GaussianFilterState, GaussianTrace, filter_gaussian, gvb_predict, gvb_update
from .errors import DegreesOfFreedomError, DivergenceError, NumericalDegeneracyError, ParameterError
from .harness import BenchmarkRecord, BenchmarkResult, ExperimentConfig, run_benchmark, write_benchmark
from .identifier import (
    FilterState,
    IdentifierConfig,
    SkewTrace,
    VbIterate,
    build_regressor,
    filter_skew,
    predict,
    run_identifier,
    vb_measurement_update,
)
from .mvniw import MvniwParams, expected_R, forget, mvniw_cross_moments, mvniw_sample
from .priors import adaptive_Q, gaussian_noise_prior, skew_noise_prior, stable_spline_prior
from .simulate import generate_stable_coefficients, identification_error, simulate_trajectory
from .skew_normal import SkewNormalParams, sn_logpdf, sn_moments, sn_pdf, sn_sample
from .truncation import GaussianMoments, sequential_truncate, truncated_scalar_moments

__all__ = [
    "__version__",
    "BenchmarkRecord",
    "BenchmarkResult",
    "DegreesOfFreedomError",
    "DivergenceError",
    "ExperimentConfig",
    "FilterState",
    "GaussianFilterState",
    "GaussianMoments",
    "GaussianTrace",
    "IdentifierConfig",
    "MvniwParams",
    "NumericalDegeneracyError",
    "ParameterError",
    "SkewNormalParams",
    "SkewTrace",
    "VbIterate",
    "adaptive_Q",
    "build_regressor",
    "expected_R",
    "filter_gaussian",
    "filter_skew",
    "forget",
    "gaussian_noise_prior",
    "generate_stable_coefficients",
    "gvb_predict",
    "gvb_update",
    "identification_error",
    "mvniw_cross_moments",
    "mvniw_sample",
    "predict",
    "run_benchmark",
    "run_identifier",
    "sequential_truncate",
    "simulate_trajectory",
    "skew_noise_prior",
    "sn_logpdf",
    "sn_moments",
    "sn_pdf",
    "sn_sample",
    "stable_spline_prior",
    "truncated_scalar_moments",
    "vb_measurement_update",
    "write_benchmark",
]
