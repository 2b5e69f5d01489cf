"""Periodic spectral collocation for weighted Laplacians on flat tori.

The (a, b)-flat torus is pulled back to the square [0, 2 pi)^2 sampled on an
n x n grid, stored with x varying fastest (node ``j * n + i`` sits at
``(x_i, y_j)``). On this grid the Laplace-Beltrami operator is

    -Delta_{a,b} = -(4 pi^2 / b^2) [(a^2 + b^2) d_xx - 2 a d_xy + d_yy]

and the conformally weighted spectrum solves ``L v = lambda diag(omega) v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import toeplitz

from .eigensolve import EigenRequest, EigenResult, EigenSolverError, solve_generalized
from .lattice import FOUR_PI2, TorusParams, _as_params


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid with ``n`` points per direction on [0, 2 pi)."""

    n: int

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError(f"grid size must be even and at least 4, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.n

    @property
    def size(self) -> int:
        return self.n * self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened node coordinates ``(x, y)`` in storage order."""
        x, y = np.meshgrid(self.nodes, self.nodes, indexing="xy")
        return x.ravel(), y.ravel()

    def node_weight(self, p) -> float:
        """Quadrature weight of one node on the (a, b) torus, whose area is b."""
        return _as_params(p).b * self.h**2 / FOUR_PI2

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x, y)`` at every node, in storage order."""
        x, y = self.mesh()
        return np.asarray(func(x, y), dtype=float) * np.ones_like(x)


def _check_even(n: int):
    if n < 4 or n % 2:
        raise ValueError(f"spectral differentiation needs an even n >= 4, got {n}")


@lru_cache(maxsize=8)
def _toeplitz_d(n: int) -> np.ndarray:
    h = 2.0 * math.pi / n
    k = np.arange(1, n)
    col = np.concatenate([[0.0], 0.5 * (-1.0) ** k / np.tan(k * h / 2)])
    D = toeplitz(col, -col)
    D.setflags(write=False)
    return D


@lru_cache(maxsize=8)
def _toeplitz_d2(n: int) -> np.ndarray:
    h = 2.0 * math.pi / n
    k = np.arange(1, n)
    col = np.concatenate([[-math.pi**2 / (3 * h * h) - 1.0 / 6.0], -0.5 * (-1.0) ** k / np.sin(k * h / 2) ** 2])
    D2 = toeplitz(col)
    D2.setflags(write=False)
    return D2


def toeplitz_d(n: int) -> np.ndarray:
    """First-derivative collocation matrix on ``n`` periodic points (antisymmetric)."""
    _check_even(n)
    return _toeplitz_d(n).copy()


def toeplitz_d2(n: int) -> np.ndarray:
    """Second-derivative collocation matrix on ``n`` periodic points (symmetric)."""
    _check_even(n)
    return _toeplitz_d2(n).copy()


def second_derivatives(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense ``(D_xx, D_xy, D_yy)`` on the n x n grid in storage order.

    The mixed operator is the symmetrized product
    ``(1/2)[(I kron D)(D kron I) + (D kron I)(I kron D)]``; both products equal
    ``D kron D``, so that is what is formed.
    """
    _check_even(n)
    D, D2 = _toeplitz_d(n), _toeplitz_d2(n)
    eye = np.eye(n)
    return np.kron(eye, D2), np.kron(D, D), np.kron(D2, eye)


# Matrix-free versions acting on flattened grid functions; V[j, i] = v[j*n + i].

def apply_dxx(v: np.ndarray, n: int) -> np.ndarray:
    V = v.reshape(n, n)
    return (V @ _toeplitz_d2(n).T).ravel()


def apply_dyy(v: np.ndarray, n: int) -> np.ndarray:
    V = v.reshape(n, n)
    return (_toeplitz_d2(n) @ V).ravel()


def apply_dxy(v: np.ndarray, n: int) -> np.ndarray:
    D = _toeplitz_d(n)
    V = v.reshape(n, n)
    return (D @ V @ D.T).ravel()


def _lb_coefficients(p: TorusParams) -> tuple[float, float, float]:
    scale = FOUR_PI2 / (p.b * p.b)
    return -scale * (p.a * p.a + p.b * p.b), 2.0 * scale * p.a, -scale


def assemble_lb(p, grid: PeriodicGrid) -> np.ndarray:
    """Dense matrix of ``-Delta_{a,b}`` on ``grid`` (symmetric, annihilates constants)."""
    p = _as_params(p)
    n = grid.n
    D, D2 = _toeplitz_d(n), _toeplitz_d2(n)
    cxx, cxy, cyy = _lb_coefficients(p)
    eye = np.eye(n)
    L = cxx * np.kron(eye, D2)
    L += cxy * np.kron(D, D)
    L += cyy * np.kron(D2, eye)
    return 0.5 * (L + L.T)


def apply_lb(p, v: np.ndarray, n: int) -> np.ndarray:
    """Matrix-free ``-Delta_{a,b} v``."""
    cxx, cxy, cyy = _lb_coefficients(_as_params(p))
    return cxx * apply_dxx(v, n) + cxy * apply_dxy(v, n) + cyy * apply_dyy(v, n)


def _check_omega(omega, grid: PeriodicGrid) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if w.ndim == 0:
        w = np.full(grid.size, float(w))
    w = w.reshape(-1)
    if w.size != grid.size:
        raise ValueError(f"conformal factor has {w.size} values, grid has {grid.size} nodes")
    if not np.all(np.isfinite(w)) or not np.all(w > 0):
        raise ValueError("conformal factor must be finite and strictly positive")
    return w


def solve_weighted(p, grid: PeriodicGrid, omega=1.0, k_max: int = 8, *,
                   method: str = "auto", operator: np.ndarray | None = None) -> EigenResult:
    """Smallest ``k_max + 1`` eigenpairs of ``-Delta_{a,b} v = lambda omega v``.

    Parameters
    ----------
    p : TorusParams or (a, b)
    grid : PeriodicGrid
    omega : float or array
        Conformal factor at the nodes (storage order) or a constant.
    k_max : int
    method : {"auto", "dense", "lanczos"}
    operator : ndarray, optional
        Precomputed :func:`assemble_lb` matrix for the same ``p`` and ``grid``.

    Returns
    -------
    EigenResult
        Vectors normalized by ``w * sum(omega * v**2) = 1`` with ``w`` the node
        weight; ``volume = w * sum(omega)``.
    """
    p = _as_params(p)
    w = _check_omega(omega, grid)
    if k_max + 1 > grid.size:
        raise ValueError("k_max exceeds the number of grid nodes")
    L = assemble_lb(p, grid) if operator is None else operator
    out = solve_generalized(L, sp.diags(w), EigenRequest(k=k_max + 1, method=method))
    if not out.converged:
        raise EigenSolverError(
            f"spectral eigensolve did not converge, residuals {out.residuals}", out
        )
    weight = grid.node_weight(p)
    return EigenResult(
        eigenvalues=out.values,
        vectors=out.vectors / math.sqrt(weight),
        volume=weight * float(w.sum()),
        residuals=out.residuals,
        method=out.method,
    )


def transport_factor(omega: np.ndarray, n: int, move: str, amount: int = 1) -> np.ndarray:
    """Carry a grid conformal factor along one moduli move.

    The returned factor on the transformed torus describes the same metric up
    to a similarity, so normalized eigenvalues agree.

    ``"shift"`` by an integer ``amount`` maps node (i, j) to (i - amount*j, j),
    ``"reflect"`` maps (i, j) to (-i, j) and ``"invert"`` maps (i, j) to
    (-j, i), all indices taken mod ``n``.
    """
    W = np.asarray(omega, dtype=float).reshape(n, n)  # W[j, i]
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    if move == "shift":
        ti, tj = (i - amount * j) % n, j
    elif move == "reflect":
        ti, tj = (-i) % n, j
    elif move == "invert":
        ti, tj = (-j) % n, i
    else:
        raise ValueError(f"unknown move {move!r}")
    out = np.empty_like(W)
    out[tj, ti] = W[j, i]
    return out.ravel()
