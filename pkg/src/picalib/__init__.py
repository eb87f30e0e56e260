"""picalib: invariant-weight posterior assignment with calibration checks.

The package assigns parameter densities proportional to a positive
weight function times the likelihood, derives the unique weights for
location/scale problems from group invariance, and verifies -- by exact
identities and seeded Monte Carlo -- that those assignments are
frequentist-calibrated, while deliberately broken settings are not.
"""

from .errors import (CalibrationInfeasibleError, ConfigError, DomainError,
                     EmptyLikelihoodError, ImproperPosteriorError, InvalidInputError,
                     NonConvergenceError, PicalibError, SingularityError,
                     UnsupportedOperationError)
from .rng import stream
from .maps import MonotoneMap, affine_map, exp_map, identity_map, log_map
from .families import (ParamSpec, Sample, SamplingFamily, density_at, draw,
                       family_ids, make_family, pushforward, reduce_scale_to_location,
                       register_family, validate_sample)
from .grids import Axis, GridSpec, ParameterGrid
from .factors import (ConsistencyFactor, GroupAction, affine_action, custom_factor,
                      factor_by_kind, factor_ratio_spread, factorization_discrepancy,
                      factorization_scan, location_factor, location_scale_factor,
                      power_scale_factor, scale_factor, scaling_action,
                      tilted_location_factor, transform_factor, translation_action,
                      verify_group_equation)
from .posterior import (CredibleInterval, PosteriorDensity, assign, condition,
                        credible_interval, l1_distance, marginalize,
                        transform_parameter, update)
from .calibration import (CalibrationSpec, CoverageReport, ValueCoverage,
                          exact_calibration_residual, run_coverage)
from .asymptotics import (MleResult, coverage_vs_n, gaussian_approx, mle,
                          observed_information)

__version__ = "0.1.0"

__all__ = [
    "Axis", "CalibrationInfeasibleError", "CalibrationSpec", "ConfigError",
    "ConsistencyFactor", "CoverageReport", "CredibleInterval", "DomainError",
    "EmptyLikelihoodError", "GridSpec", "GroupAction", "ImproperPosteriorError",
    "InvalidInputError", "MleResult", "MonotoneMap", "NonConvergenceError",
    "ParamSpec", "ParameterGrid", "PicalibError", "PosteriorDensity", "Sample",
    "SamplingFamily", "SingularityError", "UnsupportedOperationError",
    "ValueCoverage", "affine_action", "affine_map", "assign", "condition",
    "coverage_vs_n", "credible_interval", "custom_factor", "density_at", "draw",
    "exact_calibration_residual", "exp_map", "factor_by_kind",
    "factor_ratio_spread", "factorization_discrepancy", "factorization_scan",
    "family_ids", "gaussian_approx", "identity_map", "l1_distance",
    "location_factor", "location_scale_factor", "log_map", "make_family",
    "marginalize", "mle", "observed_information", "power_scale_factor",
    "pushforward", "reduce_scale_to_location", "register_family", "run_coverage",
    "scale_factor", "scaling_action", "stream", "tilted_location_factor",
    "transform_factor", "transform_parameter", "translation_action", "update",
    "validate_sample", "verify_group_equation",
]
