"""Spin-1/2 rational Gaudin magnets in arbitrarily oriented fields.

Eigenstates are found as solutions of quadratic equations in eigenvalue-based
variables, turned into Bethe roots and Fock vectors, and used for determinant
scalar products and quench dynamics. Every analytic route has a brute-force
Fock-space counterpart for testing.
"""

from .bethe import (
    COMMON,
    ROTATED,
    BetheSolution,
    SolverOptions,
    bethe_roots,
    charge_eigenvalues,
    energy,
    newton_refine,
    residual,
    shift_frame,
    solve_all,
    solve_common,
    to_common,
)
from .dynamics import EigenExpansion, QuenchSpec, direct_propagate, eigen_expand, evolve_observable
from .errors import GaudinError
from .fock import FockVector, bethe_vector, conserved_charges, ed_reference
from .model import FieldParams, SpinSystem, build_system, field_params
from .overlap import canonical_projection, determinant_overlap, direct_overlap, direct_projection
from .roots import RootSet, gamma_residuals, lambdas_from_roots, roots_from_lambdas

__version__ = "0.1.0"

__all__ = [
    "COMMON",
    "ROTATED",
    "BetheSolution",
    "EigenExpansion",
    "FieldParams",
    "FockVector",
    "GaudinError",
    "QuenchSpec",
    "RootSet",
    "SolverOptions",
    "SpinSystem",
    "bethe_roots",
    "bethe_vector",
    "build_system",
    "canonical_projection",
    "charge_eigenvalues",
    "conserved_charges",
    "determinant_overlap",
    "direct_overlap",
    "direct_projection",
    "direct_propagate",
    "ed_reference",
    "eigen_expand",
    "energy",
    "evolve_observable",
    "field_params",
    "gamma_residuals",
    "lambdas_from_roots",
    "newton_refine",
    "residual",
    "roots_from_lambdas",
    "shift_frame",
    "solve_all",
    "solve_common",
    "to_common",
]
