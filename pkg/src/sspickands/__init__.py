"""Self-similar Gaussian processes and their Pickands and Piterbarg functionals."""

__version__ = "0.1.0"

from .bounds import BoundsReport, compute_c1_c2, piterbarg_bounds, pickands_closed_form
from .estimator import (
    estimate_functional,
    estimate_pickands_curve,
    estimate_refined,
    exact_b2_functional,
)
from .exceedance import ExceedanceSpec, estimate_exceedance, normal_tail, ratio_series
from .processes import Family, ProcessSpec, SSTriple, covariance, ss_parameters, variance, variogram
from .sampler import Grid, Scheme, build_grid, derive_integrated, sample_fbm_fft, sample_paths

__all__ = [
    "__version__",
    "BoundsReport",
    "ExceedanceSpec",
    "Family",
    "Grid",
    "ProcessSpec",
    "SSTriple",
    "Scheme",
    "build_grid",
    "compute_c1_c2",
    "covariance",
    "derive_integrated",
    "estimate_exceedance",
    "estimate_functional",
    "estimate_pickands_curve",
    "estimate_refined",
    "exact_b2_functional",
    "normal_tail",
    "pickands_closed_form",
    "piterbarg_bounds",
    "ratio_series",
    "sample_fbm_fft",
    "sample_paths",
    "ss_parameters",
    "variance",
    "variogram",
]
