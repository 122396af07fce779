"""symvi: variational inference with phi-divergences over location-scale
families, plus symmetry-based recovery diagnostics."""

__version__ = "0.1.0"

from . import diagnostics, divergences, families, linalg, optimize, targets
from .diagnostics import accuracy, asymmetry, quantile
from .divergences import (
    DivergenceEstimate,
    PhiSpec,
    builtin_phi,
    estimate,
    estimate_quadrature,
    parse_divergence,
    pathwise_grad,
    pathwise_grad_quadrature,
)
from .families import (
    BaseDensity,
    LocationFamily,
    LocationScaleParams,
    freeze_scale,
    standard_laplace,
    standard_normal,
    standard_student_t,
)
from .linalg import PDMatrix, cholesky, correlation_of, mahalanobis, normalized_cov, sqrt_pd
from .optimize import (
    FitResult,
    GridAxis,
    GridSpec,
    OptimizerConfig,
    fit_grid,
    fit_stochastic,
    solve_gamma,
)
from .targets import Target, from_spec

__all__ = [
    "__version__",
    "PDMatrix",
    "cholesky",
    "sqrt_pd",
    "mahalanobis",
    "normalized_cov",
    "correlation_of",
    "BaseDensity",
    "LocationScaleParams",
    "LocationFamily",
    "freeze_scale",
    "standard_normal",
    "standard_laplace",
    "standard_student_t",
    "PhiSpec",
    "DivergenceEstimate",
    "builtin_phi",
    "parse_divergence",
    "estimate",
    "estimate_quadrature",
    "pathwise_grad",
    "pathwise_grad_quadrature",
    "OptimizerConfig",
    "FitResult",
    "GridAxis",
    "GridSpec",
    "fit_stochastic",
    "fit_grid",
    "solve_gamma",
    "asymmetry",
    "accuracy",
    "quantile",
    "Target",
    "from_spec",
]
