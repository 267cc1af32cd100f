"""Lagrange finite elements on triangles and assembly of the coupled forms."""

from .assembly import (
    apply_dirichlet,
    constrain_matrix,
    default_exactness,
    dirichlet_data,
    divergence_matrix,
    error_norm,
    interface_flux,
    interface_load,
    interface_normal_matrix,
    interface_tangential_matrix,
    lift_rhs,
    load_vector,
    mass_matrix,
    stiffness_matrix,
)
from .reference import QuadratureRule, lattice_nodes, quadrature, reference_basis
from .space import FiniteElementSpace

__all__ = [
    "FiniteElementSpace",
    "QuadratureRule",
    "apply_dirichlet",
    "constrain_matrix",
    "default_exactness",
    "dirichlet_data",
    "divergence_matrix",
    "error_norm",
    "interface_flux",
    "interface_load",
    "interface_normal_matrix",
    "interface_tangential_matrix",
    "lattice_nodes",
    "lift_rhs",
    "load_vector",
    "mass_matrix",
    "quadrature",
    "reference_basis",
    "stiffness_matrix",
]
