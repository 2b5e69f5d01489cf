"""Piecewise-linear finite elements for conformally weighted Laplacians.

For a triangle with metric Gram matrix ``G`` (edges ``v1 - v0`` and
``v2 - v0``) and area ``|T|``, the P1 stiffness block is
``|T| * R G^{-1} R^T`` where ``R`` holds the reference gradients of the three
hat functions. The mass matrix integrates ``omega * e_i * e_j`` exactly for a
piecewise-linear ``omega``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .eigensolve import EigenRequest, EigenResult, EigenSolverError, solve_generalized
from .lattice import _as_params
from .mesh import TriMesh, wrapped_uv_edges

REF_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

def _cubic_table() -> np.ndarray:
    """C[i, j, m] = (1/|T|) * integral over T of e_i e_j e_m."""
    from math import factorial
    C = np.empty((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for m in range(3):
                powers = [(i, j, m).count(v) for v in range(3)]
                # integral of l0^p0 l1^p1 l2^p2 = 2|T| p0! p1! p2! / (p0+p1+p2+2)!
                C[i, j, m] = 2.0 * np.prod([factorial(q) for q in powers]) / factorial(5)
    return C


_CUBIC = _cubic_table()


@dataclass
class AssembledPair:
    """Stiffness ``A`` and weighted mass ``B`` of a mesh, both sparse CSR."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    areas: np.ndarray

    @property
    def volume(self) -> float:
        return float(self.B.sum())


def _scatter(T: np.ndarray, blocks: np.ndarray, n: int) -> sp.csr_matrix:
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    M = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return M


def _metric_blocks(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
    bad = np.flatnonzero(~(det > 0))
    if bad.size:
        raise ValueError(f"triangle {int(bad[0])} is degenerate (zero area)")
    area = 0.5 * np.sqrt(det)
    Ginv = np.empty_like(G)
    Ginv[:, 0, 0] = G[:, 1, 1] / det
    Ginv[:, 1, 1] = G[:, 0, 0] / det
    Ginv[:, 0, 1] = Ginv[:, 1, 0] = -G[:, 0, 1] / det
    K = np.einsum("ia,fab,jb->fij", REF_GRAD, Ginv, REF_GRAD) * area[:, None, None]
    return K, area


def weighted_mass_blocks(area: np.ndarray, omega_tri: np.ndarray) -> np.ndarray:
    """Per-triangle mass blocks for vertex values ``omega_tri`` of shape (F, 3).

    Diagonal ``|T|/30 (3 w_i + w_j + w_k)``, off-diagonal ``|T|/60 (2 w_i + 2 w_j + w_m)``.
    """
    return np.einsum("ijm,fm->fij", _CUBIC, omega_tri) * area[:, None, None]


def _vertex_values(mesh: TriMesh, omega) -> np.ndarray:
    if omega is None:
        return np.ones(mesh.n_vertices)
    w = np.asarray(omega, dtype=float)
    if w.ndim == 0:
        w = np.full(mesh.n_vertices, float(w))
    if w.shape != (mesh.n_vertices,):
        raise ValueError(f"conformal factor needs {mesh.n_vertices} values, got {w.shape}")
    if not np.all(np.isfinite(w)) or not np.all(w > 0):
        raise ValueError("conformal factor must be finite and strictly positive")
    return w


def assemble(mesh: TriMesh, omega=None) -> AssembledPair:
    """Stiffness and omega-weighted mass matrices of a mesh."""
    w = _vertex_values(mesh, omega)
    K, area = _metric_blocks(mesh.metric())
    M = weighted_mass_blocks(area, w[mesh.triangles])
    n = mesh.n_vertices
    return AssembledPair(_scatter(mesh.triangles, K, n), _scatter(mesh.triangles, M, n), area)


def node_measure(mesh: TriMesh) -> np.ndarray:
    """Integral of each hat function: a third of the adjacent triangle areas."""
    area = mesh.areas()
    return np.bincount(mesh.triangles.ravel(), np.repeat(area / 3.0, 3), minlength=mesh.n_vertices)


def mass_derivative_quadratic(mesh: TriMesh, x: np.ndarray, area: np.ndarray | None = None) -> np.ndarray:
    """``d/d omega_m (x^T B(omega) x)`` for every vertex m, i.e. the integral of x^2 e_m."""
    area = mesh.areas() if area is None else area
    P = x[mesh.triangles]
    contrib = np.einsum("ijm,fi,fj->fm", _CUBIC, P, P) * area[:, None]
    return np.bincount(mesh.triangles.ravel(), contrib.ravel(), minlength=mesh.n_vertices)


def _finish(A, B, k_max: int, method: str) -> EigenResult:
    out = solve_generalized(A, B, EigenRequest(k=k_max + 1, method=method))
    if not out.converged:
        raise EigenSolverError(f"mesh eigensolve did not converge, residuals {out.residuals}", out)
    return EigenResult(out.values, out.vectors, float(B.sum()), out.residuals, out.method)


def solve_mesh(mesh: TriMesh, omega=None, k_max: int = 8, *, method: str = "auto") -> EigenResult:
    """Smallest ``k_max + 1`` eigenpairs of ``A x = lambda B(omega) x``.

    Vectors are B-orthonormal and ``volume`` is the omega-weighted area.
    """
    pair = assemble(mesh, omega)
    if k_max + 1 > mesh.n_vertices:
        raise ValueError("k_max exceeds the number of vertices")
    return _finish(pair.A, pair.B, k_max, method)


# --------------------------------------------------------------------------- flat tori in parameter form

@dataclass
class FlatTorusForms:
    """Parameter-space pieces of a flat-torus mesh discretization.

    With parameter coordinates (s, t) the (a, b) flat metric has matrix
    [[1, a], [a, a^2 + b^2]], so the stiffness is
    ``(1/b) [(a^2 + b^2) S_ss - a (S_st + S_ts) + S_tt]`` and the mass is
    ``b * M(omega)``, where the ``S`` and ``M`` matrices live on the unit square.
    """

    S_ss: sp.csr_matrix
    S_mix: sp.csr_matrix  # S_st + S_ts
    S_tt: sp.csr_matrix
    param_area: np.ndarray

    def stiffness(self, p) -> sp.csr_matrix:
        p = _as_params(p)
        return ((p.a * p.a + p.b * p.b) * self.S_ss - p.a * self.S_mix + self.S_tt) / p.b

    def stiffness_da(self, p) -> sp.csr_matrix:
        p = _as_params(p)
        return (2 * p.a * self.S_ss - self.S_mix) / p.b

    def stiffness_db(self, p) -> sp.csr_matrix:
        p = _as_params(p)
        return 2.0 * self.S_ss - self.stiffness(p) / p.b


def flat_torus_forms(mesh: TriMesh) -> FlatTorusForms:
    """Split the flat-torus stiffness by parameter-derivative pairs."""
    e1, e2 = wrapped_uv_edges(mesh)
    J = np.stack([e1, e2], axis=2)  # columns are parameter edge vectors
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det <= 0):
        raise ValueError(f"triangle {int(np.flatnonzero(det <= 0)[0])} is inverted in parameter space")
    area = 0.5 * det
    Jinv = np.linalg.inv(J)
    grads = np.einsum("ia,fab->fib", REF_GRAD, Jinv)  # (F, 3 hats, 2 params)
    gs, gt = grads[..., 0], grads[..., 1]
    n = mesh.n_vertices
    T = mesh.triangles
    Sss = np.einsum("fi,fj->fij", gs, gs) * area[:, None, None]
    Stt = np.einsum("fi,fj->fij", gt, gt) * area[:, None, None]
    Smix = (np.einsum("fi,fj->fij", gs, gt) + np.einsum("fi,fj->fij", gt, gs)) * area[:, None, None]
    return FlatTorusForms(_scatter(T, Sss, n), _scatter(T, Smix, n), _scatter(T, Stt, n), area)


def flat_torus_mass(mesh: TriMesh, p, omega=None, forms: FlatTorusForms | None = None) -> sp.csr_matrix:
    forms = flat_torus_forms(mesh) if forms is None else forms
    w = _vertex_values(mesh, omega)
    blocks = weighted_mass_blocks(forms.param_area, w[mesh.triangles])
    return _as_params(p).b * _scatter(mesh.triangles, blocks, mesh.n_vertices)


def solve_flat_torus_mesh(mesh: TriMesh, p, omega=None, k_max: int = 8, *, method: str = "auto",
                          forms: FlatTorusForms | None = None) -> EigenResult:
    """Eigenpairs of a torus mesh under the (a, b) flat metric given by ``p``."""
    forms = flat_torus_forms(mesh) if forms is None else forms
    A = forms.stiffness(p)
    B = flat_torus_mass(mesh, p, omega, forms)
    return _finish(A, B, k_max, method)
