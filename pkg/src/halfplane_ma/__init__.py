"""Monge-Ampere equations ``det D^2 u = (a+by)**alpha`` on the half-plane.

Closed-form solution families, the partial Legendre transform, the change of
variables to divergence form, Kelvin transforms and a finite-difference
Newton solver.
"""
from ._kernels import BACKEND
from .closed_forms import (DirichletFamily, EntireFamily, NeumannFamily,
                           sharpness_lower_bound)
from .core import (DomainError, EquationParams, FamilyCoeffs, GridError, GridSpec,
                   ResidualReport, ScalarField, fd_hessian, ma_residual)
from .partial_legendre import (ConvexityError, grushin_residual, plt_forward,
                               plt_inverse)
from .solver import SolverConfig, SolveReport, SolverError, solve_dirichlet

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConvexityError", "DirichletFamily", "DomainError", "EntireFamily",
    "EquationParams", "FamilyCoeffs", "GridError", "GridSpec", "NeumannFamily",
    "ResidualReport", "ScalarField", "SolveReport", "SolverConfig", "SolverError",
    "fd_hessian", "grushin_residual", "ma_residual", "plt_forward", "plt_inverse",
    "sharpness_lower_bound", "solve_dirichlet",
]
