"""Kernel instrumental-variable estimation of average marginal effects with bootstrap inference."""

from .estimator import Dataset, Fit, FitConfig, ame, fit, predict_h, predict_h_deriv
from .exceptions import (
    CollinearityError,
    ConfigError,
    DataError,
    DegenerateScaleError,
    InsufficientDataError,
    InvalidInputError,
    NumericError,
    RkhsAmeError,
    SelectionError,
)
from .inference import BootstrapConfig, TestResult, bootstrap_draws, confidence_interval, test
from .kernels import KernelSpec
from .numerics import RandomStream
from .regressor import AMERegressor
from .selection import select_lambda
from .simulation import DgpSpec, run_power_curve, run_size_experiment
from .weighting import MuSpec

__version__ = "0.1.0"

__all__ = [
    "AMERegressor",
    "BootstrapConfig",
    "CollinearityError",
    "ConfigError",
    "DataError",
    "Dataset",
    "DegenerateScaleError",
    "DgpSpec",
    "Fit",
    "FitConfig",
    "InsufficientDataError",
    "InvalidInputError",
    "KernelSpec",
    "MuSpec",
    "NumericError",
    "RandomStream",
    "RkhsAmeError",
    "SelectionError",
    "TestResult",
    "ame",
    "bootstrap_draws",
    "confidence_interval",
    "fit",
    "predict_h",
    "predict_h_deriv",
    "run_power_curve",
    "run_size_experiment",
    "select_lambda",
    "test",
]
