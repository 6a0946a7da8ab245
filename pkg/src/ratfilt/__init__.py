"""Rational spectral filter toolkit for contour-based interior eigensolvers.

Design filters by nested minimization of the worst-case convergence rate,
evaluate and scale them, and validate them with a desk-scale filtered
subspace-iteration eigensolver.
"""

from .baselines import gauss_legendre_filter, gauss_legendre_nodes
from .design import DesignConfig, DesignResult, fit_filter, minimize_wcr
from .eigensolver import (
    EigenProblem,
    SolveReport,
    apply_filter,
    condition_report,
    generate_slices,
    predicted_rate,
    subspace_iteration,
)
from .filters import (
    RationalFilter,
    WcrReport,
    compute_wcr,
    eval_filter,
    load_filter,
    save_filter,
    scale_filter,
)
from .least_squares import gradient, objective, pack, restore_quadrant, unpack
from .optim import (
    BoxSpec,
    bfgs_minimize,
    de_minimize_1d,
    lbfgsb_minimize,
    nelder_mead,
    project_box,
)
from .weights import WeightVector, initial_weight_vector, repair_into_vs, weight_at

__all__ = [
    "BoxSpec",
    "DesignConfig",
    "DesignResult",
    "EigenProblem",
    "RationalFilter",
    "SolveReport",
    "WcrReport",
    "WeightVector",
    "apply_filter",
    "bfgs_minimize",
    "compute_wcr",
    "condition_report",
    "de_minimize_1d",
    "eval_filter",
    "fit_filter",
    "gauss_legendre_filter",
    "gauss_legendre_nodes",
    "generate_slices",
    "gradient",
    "initial_weight_vector",
    "lbfgsb_minimize",
    "load_filter",
    "minimize_wcr",
    "nelder_mead",
    "objective",
    "pack",
    "predicted_rate",
    "project_box",
    "repair_into_vs",
    "restore_quadrant",
    "save_filter",
    "scale_filter",
    "subspace_iteration",
    "unpack",
    "weight_at",
]

__version__ = "0.1.0"
