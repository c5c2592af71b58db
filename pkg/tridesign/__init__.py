"""Optimal designs and best linear unbiased estimators for regression with
triangular covariance kernels ``K(t, t') = u(min(t, t')) v(max(t, t'))``.

The most used pieces are re-exported here: kernels and models, the finite and
limiting designs, the discretization into finite plans, and the study and
storage layer used by the ``compare`` sweep.
"""

from __future__ import annotations

from .asymptotic import (
    LimitingDesign,
    MatrixLimitingDesign,
    blue_measure,
    brownian_limiting_design,
    design_doob_transform,
    limiting_design,
    matrix_limiting_design,
    optimal_covariance_matrix,
    optimal_information_matrix,
    optimal_variance_dstar,
    psi,
)
from .covmat import CovarianceMatrix, build_sigma
from .design import MatrixWeightedDesign, SignedDesign, design_points, variance_functional
from .discretize import FiniteDesignPlan, MatrixFinitePlan, finite_plan, matrix_finite_plan
from .environment import Environment
from .estimators import EstimatorReport, blue, mwe, olse, slse, wlse
from .exceptions import (
    ConfigurationError,
    DomainError,
    NumericalError,
    StorageError,
    TriDesignError,
)
from .kernel import DoobMap, TriangularKernel, doob_map, kernel_from_spec
from .logging_utils import get_logger
from .model import RegressionModel, model_from_spec
from .simulate import monte_carlo_variance, optimize_exact_blue_design
from .storage import HDF5StorageService, StorageService
from .study import Parameter, Result, Study

__all__ = [
    "TriangularKernel",
    "DoobMap",
    "doob_map",
    "kernel_from_spec",
    "RegressionModel",
    "model_from_spec",
    "CovarianceMatrix",
    "build_sigma",
    "EstimatorReport",
    "wlse",
    "olse",
    "blue",
    "slse",
    "mwe",
    "SignedDesign",
    "MatrixWeightedDesign",
    "variance_functional",
    "design_points",
    "LimitingDesign",
    "MatrixLimitingDesign",
    "limiting_design",
    "brownian_limiting_design",
    "matrix_limiting_design",
    "optimal_information_matrix",
    "optimal_covariance_matrix",
    "optimal_variance_dstar",
    "psi",
    "blue_measure",
    "design_doob_transform",
    "FiniteDesignPlan",
    "MatrixFinitePlan",
    "finite_plan",
    "matrix_finite_plan",
    "monte_carlo_variance",
    "optimize_exact_blue_design",
    "Study",
    "Parameter",
    "Result",
    "Environment",
    "StorageService",
    "HDF5StorageService",
    "TriDesignError",
    "ConfigurationError",
    "DomainError",
    "NumericalError",
    "StorageError",
    "get_logger",
]
