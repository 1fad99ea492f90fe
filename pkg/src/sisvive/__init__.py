"""Causal-effect estimation with some invalid instrumental variables.

Public surface: data loading/preprocessing, the penalized estimator with
cross-validated penalty selection, the identification (uniqueness) checker,
instrument diagnostics, TSLS/OLS baselines, and a Monte Carlo harness.
"""

from .baselines import BaselineFit, ols_fit, tsls_fit
from .data_model import ColumnRoles, Dataset, ScalingRecord, load_csv, preprocess
from .diagnostics import (
    MipDiagnostics,
    RipDiagnostics,
    SarganResult,
    StrengthDiagnostics,
    corollary2_error_bound,
    mip_constants,
    rip_constants,
    sargan_test,
    strength,
)
from .estimator import (
    CvReport,
    SisviveFit,
    cross_validate_lambda,
    estimate,
    estimate_at_lambda,
    theory_lambda,
)
from .identification import (
    IdentificationReport,
    ReducedForm,
    beta_given_valid_set,
    check_consistency_criterion,
    reduced_form,
)
from .lasso_path import LassoPath, LassoProblem, build_problem, fit_path, lambda_max, solve_at
from .projections import Projector, hat_d, projector_for
from .simulation import (
    SimulationConfig,
    SimulationSummary,
    TruthRecord,
    calibrate_gamma,
    generate_dataset,
    run_cell,
    run_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineFit",
    "ColumnRoles",
    "CvReport",
    "Dataset",
    "IdentificationReport",
    "LassoPath",
    "LassoProblem",
    "MipDiagnostics",
    "Projector",
    "ReducedForm",
    "RipDiagnostics",
    "SarganResult",
    "ScalingRecord",
    "SimulationConfig",
    "SimulationSummary",
    "SisviveFit",
    "StrengthDiagnostics",
    "TruthRecord",
    "beta_given_valid_set",
    "build_problem",
    "calibrate_gamma",
    "check_consistency_criterion",
    "corollary2_error_bound",
    "cross_validate_lambda",
    "estimate",
    "estimate_at_lambda",
    "fit_path",
    "generate_dataset",
    "hat_d",
    "lambda_max",
    "load_csv",
    "mip_constants",
    "ols_fit",
    "preprocess",
    "projector_for",
    "reduced_form",
    "rip_constants",
    "run_cell",
    "run_grid",
    "sargan_test",
    "solve_at",
    "strength",
    "theory_lambda",
    "tsls_fit",
    "__version__",
]
