"""Closed-form graphical lasso via soft-thresholding, with certificates and a reference solver."""

__version__ = "0.1.0"

from .closed_form import (
    CLOSED_APPROX,
    CLOSED_EXACT,
    NUMERICAL,
    WARM_STARTED,
    ConditionReport,
    EpsilonCertificate,
    GlSolution,
    approx_solution,
    check_conditions,
    closed_form_solution,
    epsilon_certificate,
    exact_solution,
    path_sum_certificate_matrix,
    tree_complement,
    tree_inverse,
)
from .covariance import lambda_for_k, magnitude_ladder, residue, sample_covariance
from .estimators import ClosedFormGraphicalLasso
from .exceptions import *  # noqa: F401,F403
from .numerics import SparseSymmetric
from .solver import SolverConfig, exact_kkt_residual, gl_objective, glasso_solve, warm_start_solve

__all__ = [
    "ClosedFormGraphicalLasso",
    "SparseSymmetric",
    "SolverConfig",
    "residue",
    "sample_covariance",
    "magnitude_ladder",
    "lambda_for_k",
    "check_conditions",
    "approx_solution",
    "closed_form_solution",
    "exact_solution",
    "epsilon_certificate",
    "path_sum_certificate_matrix",
    "tree_complement",
    "tree_inverse",
    "glasso_solve",
    "warm_start_solve",
    "gl_objective",
    "exact_kkt_residual",
    "ConditionReport",
    "EpsilonCertificate",
    "GlSolution",
    "CLOSED_EXACT",
    "CLOSED_APPROX",
    "NUMERICAL",
    "WARM_STARTED",
]
