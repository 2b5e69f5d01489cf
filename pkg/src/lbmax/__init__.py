"""Laplace-Beltrami spectra of closed surfaces and maximization of volume-normalized eigenvalues.

The main entry points are re-exported here; see the submodules for details.
"""
from .eigensolve import EigenRequest, EigenResult, EigenSolverError, solve_generalized
from .lattice import EQUILATERAL, SQUARE, TorusParams, flat_torus_local_max, flat_torus_spectrum, normalized_spectrum
from .moduli import canonicalize, contains
from .optimizer import OptimConfig, OptimRun, maximize_conformal, maximize_moduli, multistart
from .surfaces import FlatTorusMeshSurface, GridSurface, MeshSurface

__all__ = [
    "EQUILATERAL",
    "SQUARE",
    "EigenRequest",
    "EigenResult",
    "EigenSolverError",
    "FlatTorusMeshSurface",
    "GridSurface",
    "MeshSurface",
    "OptimConfig",
    "OptimRun",
    "TorusParams",
    "canonicalize",
    "contains",
    "flat_torus_local_max",
    "flat_torus_spectrum",
    "maximize_conformal",
    "maximize_moduli",
    "multistart",
    "normalized_spectrum",
    "solve_generalized",
]

__version__ = "0.1.0"
