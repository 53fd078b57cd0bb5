"""Numerical fractional calculus: operators, expansions, and variational solvers.

The package approximates Riemann-Liouville, Caputo and Hadamard derivatives
and integrals (Grunwald-Letnikov grids, integer-order series, moment
expansions with error bounds) and solves fractional variational and
optimal-control problems by direct discretization and by indirect
(Hamiltonian boundary-value) methods.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DomainError,
    EvaluationError,
    FracvarError,
    GridError,
    ParseError,
    SolverError,
    UnsupportedProblemError,
)
from .special import GLWeights, gamma, gl_weights, mittag_leffler, stirling
from .funcmodel import (
    FunctionModel,
    TabularFunction,
    diff_expr,
    eval_expr,
    parse_expr,
    print_expr,
    tabular_first_derivative,
)
from .approx import (
    MomentCoeffs,
    MomentState,
    TruncationBound,
    coeff_truncation_error,
    frac_deriv_expansion,
    frac_deriv_grid,
    frac_integral_expansion,
    moment_coeffs,
    moment_states,
    tabular_frac_deriv,
    truncation_bound,
)
from .numerics import (
    BvpSolution,
    BvpSpec,
    NewtonOptions,
    NewtonResult,
    OdeSystem,
    Trajectory,
    newton_solve,
    quad,
    rk4_solve,
    shoot_bvp,
)

__all__ = [
    "__version__",
    "FracvarError",
    "DomainError",
    "EvaluationError",
    "ParseError",
    "GridError",
    "UnsupportedProblemError",
    "SolverError",
    "ConvergenceError",
    "GLWeights",
    "gamma",
    "gl_weights",
    "mittag_leffler",
    "stirling",
    "FunctionModel",
    "TabularFunction",
    "parse_expr",
    "print_expr",
    "eval_expr",
    "diff_expr",
    "tabular_first_derivative",
    "MomentCoeffs",
    "MomentState",
    "TruncationBound",
    "moment_coeffs",
    "coeff_truncation_error",
    "frac_deriv_grid",
    "frac_deriv_expansion",
    "frac_integral_expansion",
    "moment_states",
    "truncation_bound",
    "tabular_frac_deriv",
    "OdeSystem",
    "NewtonOptions",
    "NewtonResult",
    "Trajectory",
    "BvpSpec",
    "BvpSolution",
    "quad",
    "rk4_solve",
    "newton_solve",
    "shoot_bvp",
]
