"""Discretized surfaces as seen by the optimizer.

Each surface knows its degrees of freedom for the conformal factor, their
base measure, how to solve the weighted eigenproblem and how to turn an
eigenpair into derivatives. Flat tori on a grid or on a mesh can also move
their lattice parameters.
"""
from __future__ import annotations

import numpy as np

from .eigensolve import EigenResult
from .fem import assemble, flat_torus_forms, flat_torus_mass, node_measure, _finish
from .gradients import (
    cluster_indices, grid_moduli_derivatives, grid_omega_density,
    mesh_moduli_derivatives, mesh_omega_density,
)
from .lattice import TorusParams, _as_params
from .mesh import TriMesh
from .spectral import PeriodicGrid, assemble_lb, solve_weighted


class Surface:
    """Common interface; subclasses fill in the discretization."""

    has_moduli = False
    params: TorusParams | None = None
    method = "auto"

    @property
    def size(self) -> int:
        return len(self.measure)

    def solve(self, omega, k_max: int) -> EigenResult:
        raise NotImplementedError

    def omega_density(self, lam: float, vec: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def moduli_derivatives(self, lam: float, vec: np.ndarray) -> tuple[float, float]:
        raise NotImplementedError(f"{type(self).__name__} has no moduli")

    def with_params(self, p) -> "Surface":
        raise NotImplementedError(f"{type(self).__name__} has no moduli")

    def solve_cluster(self, omega, k: int, pad: int = 3) -> EigenResult:
        """Solve far enough past index ``k`` that its eigenvalue cluster is complete."""
        k_max = min(k + pad, self.size - 1)
        while True:
            res = self.solve(omega, k_max)
            _, open_top = cluster_indices(res.eigenvalues, k)
            if not open_top or k_max >= self.size - 1:
                return res
            k_max = min(2 * k_max + 1, self.size - 1)


class GridSurface(Surface):
    """Flat torus sampled on a periodic collocation grid."""

    has_moduli = True

    def __init__(self, p, n: int, method: str = "auto"):
        self.params = _as_params(p)
        self.grid = PeriodicGrid(n)
        self.method = method
        self._operator = None

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def weight(self) -> float:
        return self.grid.node_weight(self.params)

    @property
    def measure(self) -> np.ndarray:
        return np.full(self.grid.size, self.weight)

    @property
    def operator(self) -> np.ndarray:
        if self._operator is None:
            self._operator = assemble_lb(self.params, self.grid)
        return self._operator

    def solve(self, omega, k_max: int) -> EigenResult:
        return solve_weighted(self.params, self.grid, omega, k_max, method=self.method,
                              operator=self.operator)

    def omega_density(self, lam, vec):
        return grid_omega_density(lam, vec)

    def moduli_derivatives(self, lam, vec):
        return grid_moduli_derivatives(self.params, self.n, lam, vec, self.weight)

    def with_params(self, p) -> "GridSurface":
        return GridSurface(p, self.n, self.method)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.mesh()


class MeshSurface(Surface):
    """Triangle mesh with its own (embedded or stored) metric."""

    def __init__(self, mesh: TriMesh, method: str = "auto"):
        self.mesh = mesh
        self.method = method
        base = assemble(mesh)
        self._stiffness = base.A
        self._areas = base.areas
        self.measure = node_measure(mesh)

    def solve(self, omega, k_max: int) -> EigenResult:
        if k_max + 1 > self.mesh.n_vertices:
            raise ValueError("k_max exceeds the number of vertices")
        B = assemble(self.mesh, omega).B
        return _finish(self._stiffness, B, k_max, self.method)

    def omega_density(self, lam, vec):
        return mesh_omega_density(lam, vec, self.mesh, self.measure, self._areas)

    def nodes(self) -> np.ndarray:
        return self.mesh.vertices


class FlatTorusMeshSurface(Surface):
    """Torus mesh in parameter coordinates, carrying the (a, b) flat metric."""

    has_moduli = True

    def __init__(self, mesh: TriMesh, p, method: str = "auto", forms=None):
        self.mesh = mesh
        self.params = _as_params(p)
        self.method = method
        self.forms = flat_torus_forms(mesh) if forms is None else forms
        self._stiffness = self.forms.stiffness(self.params)
        self._param_measure = np.bincount(
            mesh.triangles.ravel(), np.repeat(self.forms.param_area / 3.0, 3), minlength=mesh.n_vertices
        )
        self.measure = self.params.b * self._param_measure

    def solve(self, omega, k_max: int) -> EigenResult:
        B = flat_torus_mass(self.mesh, self.params, omega, self.forms)
        return _finish(self._stiffness, B, k_max, self.method)

    def omega_density(self, lam, vec):
        areas = self.params.b * self.forms.param_area
        return mesh_omega_density(lam, vec, self.mesh, self.measure, areas)

    def moduli_derivatives(self, lam, vec):
        return mesh_moduli_derivatives(self.forms, self.params, lam, vec)

    def with_params(self, p) -> "FlatTorusMeshSurface":
        return FlatTorusMeshSurface(self.mesh, p, self.method, self.forms)
