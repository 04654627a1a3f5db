"""Finite-element computation of weighted Hardy constants and p-Laplacian eigenvalues."""
from .analysis import (
    check_corollary_inequality,
    fit_decay_exponent,
    hardy_derivative,
    membership_in_A,
    monotone_transform,
    quotient_derivative,
    run_sweep,
    solve_alpha,
)
from .domain import Annulus, Interval, Polygon, build_domain, distance_to_boundary, load_spec
from .fem import Field, evaluate_quotient
from .mesh import triangulate
from .oracle import RadialProblem, convex_value, radial_constant
from .solver import SolveConfig, compute_constant, minimize_quotient

__all__ = [
    "Annulus", "Field", "Interval", "Polygon", "RadialProblem", "SolveConfig",
    "build_domain", "check_corollary_inequality", "compute_constant", "convex_value",
    "distance_to_boundary", "evaluate_quotient", "fit_decay_exponent", "hardy_derivative",
    "load_spec", "membership_in_A", "minimize_quotient", "monotone_transform",
    "quotient_derivative", "radial_constant", "run_sweep", "solve_alpha", "triangulate",
]
