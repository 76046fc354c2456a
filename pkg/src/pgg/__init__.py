"""Spatially inhomogeneous optional public goods game: exact game polynomials,
Hamiltonian and Lyapunov structure, ODE/PDE/shadow solvers and experiments."""

from .model import ModelParams, OdeState, interior_fixed_point
from .hamiltonian import build_context, certify_hessian
from .pde import FieldPair, Grid1D, InitialSpec, init_fields

__all__ = ["ModelParams", "OdeState", "interior_fixed_point", "build_context", "certify_hessian",
           "FieldPair", "Grid1D", "InitialSpec", "init_fields"]
