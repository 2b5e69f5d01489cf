"""Smallest eigenpairs of symmetric-definite pencils ``A x = lambda B x``.

Two routes are provided. :func:`dense_reference` hands the pencil to LAPACK
and serves as the oracle. :func:`lanczos` is a shift-invert Lanczos iteration
in the B-inner product with full reorthogonalization and thick restarts; it
only needs a factorization of ``A - sigma B`` and products with ``B``.
:func:`solve_generalized` chooses between them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096
SPARSE_DENSE_LIMIT = 1000
REFERENCE_LIMIT = 5000


class EigenSolverError(RuntimeError):
    """Eigensolver failure; carries the best iterate when one exists."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class EigenRequest:
    """Parameters for :func:`solve_generalized`.

    ``shift=0`` selects an automatic shift slightly below zero, because the
    stiffness matrices this package produces are singular.
    """

    k: int
    tol: float = 1e-9
    max_iter: int = 2000
    shift: float = 0.0
    method: str = "auto"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.method not in ("auto", "dense", "lanczos"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class GeneralizedEigs:
    """Output of :func:`solve_generalized`."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    converged: bool = True
    method: str = "dense"
    iterations: int = 0


@dataclass
class EigenResult:
    """Eigenpairs of a weighted Laplace problem with volume normalization.

    ``vectors[:, i]`` is normalized so that its weighted quadrature norm is 1.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    volume: float
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = "dense"

    @property
    def normalized(self) -> np.ndarray:
        return self.eigenvalues * self.volume

    @property
    def eigenvectors(self) -> list[np.ndarray]:
        return [self.vectors[:, i] for i in range(self.vectors.shape[1])]

    def __len__(self):
        return len(self.eigenvalues)


def _residuals(A, B, lam, X) -> np.ndarray:
    R = A @ X - (B @ X) * lam
    return np.linalg.norm(R, axis=0) / np.linalg.norm(X, axis=0)


def _as_dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def dense_reference(A, B=None):
    """Full ascending spectrum of the pencil by dense LAPACK factorization.

    Returns ``(values, vectors)`` with B-orthonormal vectors.
    """
    A = _as_dense(A)
    n = A.shape[0]
    if n > REFERENCE_LIMIT:
        raise ValueError(f"dense reference limited to dimension {REFERENCE_LIMIT}, got {n}")
    B = np.eye(n) if B is None else _as_dense(B)
    try:
        return sla.eigh(A, B)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"B is not positive definite: {exc}") from exc


def _diagonal_of(B):
    """The diagonal of ``B`` when ``B`` is a diagonal matrix, else ``None``."""
    if sp.issparse(B):
        d = B.diagonal()
        return d if B.count_nonzero() <= np.count_nonzero(d) else None
    B = np.asarray(B)
    d = np.diag(B).copy()
    return d if np.count_nonzero(B) <= np.count_nonzero(d) else None


def _dense_smallest(A, B, k):
    A = _as_dense(A)
    d = _diagonal_of(B)
    if d is not None:
        # diagonal B: symmetric scaling gives a standard problem of the same size
        if not np.all(d > 0):
            raise EigenSolverError("B is not positive definite: non-positive diagonal entry")
        s = 1.0 / np.sqrt(d)
        C = A * s[:, None] * s[None, :]
        vals, vecs = sla.eigh(C, subset_by_index=[0, k - 1], driver="evr")
        return vals, vecs * s[:, None]
    B = _as_dense(B)
    try:
        vals, vecs = sla.eigh(A, B, subset_by_index=[0, k - 1], driver="gvx")
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"B is not positive definite: {exc}") from exc
    return vals, vecs


def _auto_shift(A, B) -> float:
    da = np.abs(A.diagonal()).mean()
    db = np.abs(B.diagonal()).mean()
    if db <= 0:
        raise EigenSolverError("B has a non-positive diagonal")
    # diag(A)/diag(B) tracks the top of the spectrum; for surface Laplacians
    # the low eigenvalues sit near that ratio divided by the dimension
    return -0.1 * max(da / db, 1e-8) / A.shape[0]


def _factorize(M) -> Callable[[np.ndarray], np.ndarray]:
    if sp.issparse(M):
        lu = spla.splu(sp.csc_matrix(M))
        return lu.solve
    lu = sla.lu_factor(np.asarray(M))
    return lambda rhs: sla.lu_solve(lu, rhs)


def _b_orthogonalize(W, V, BV, passes=2):
    for _ in range(passes):
        if V.shape[1]:
            W = W - V @ (BV.T @ W)
    return W


def _b_orthonormal_block(W, B, drop_tol=1e-10):
    """B-orthonormalize the columns of ``W``, dropping numerically dependent ones."""
    BW = B @ W
    G = W.T @ BW
    G = 0.5 * (G + G.T)
    evals, U = np.linalg.eigh(G)
    if evals[-1] <= 0:
        return W[:, :0], BW[:, :0], evals
    good = evals > drop_tol * evals[-1]
    S = U[:, good] / np.sqrt(evals[good])
    return W @ S, BW @ S, evals


def lanczos(A, B, k: int, *, sigma: float | None = None, tol: float = 1e-9,
            max_iter: int = 2000, basis_size: int | None = None, block_size: int | None = None,
            seed: int = 0) -> GeneralizedEigs:
    """Shift-invert block Lanczos for the ``k`` eigenvalues of ``(A, B)`` above ``sigma``.

    The block Krylov space of ``(A - sigma B)^{-1} B`` is built in the
    B-inner product, each new block orthogonalized twice against the whole
    basis. Blocks let clusters of nearly equal eigenvalues (as on meshes of
    round spheres) converge together. Ritz pairs come from a Rayleigh-Ritz
    projection of the pencil itself, so the reported residuals
    ``||A x - lambda B x|| / ||x||`` are exact. When the basis is full, the
    leading Ritz vectors and the next Krylov block are kept and the
    iteration continues.

    Parameters
    ----------
    A, B : array or sparse matrix
        Symmetric pencil with ``B`` positive definite.
    k : int
        Number of eigenpairs.
    sigma : float, optional
        Shift below the wanted eigenvalues; defaults to a small negative value
        scaled to the diagonal of the pencil.
    tol : float
        Residual tolerance. It is floored at a multiple of machine precision
        times the pencil norm, below which residuals are rounding noise.
    max_iter : int
        Cap on the number of single-vector operator applications.
    block_size : int, optional
        Defaults to ``min(k, 8)``.
    seed : int
        Seed of the fixed random starting block.
    """
    n = A.shape[0]
    if k > n:
        raise ValueError(f"requested {k} eigenpairs of a dimension-{n} problem")
    if sigma is None:
        sigma = _auto_shift(A, B)
    bs = block_size or min(k, 8)
    m = basis_size or max(2 * k + 3 * bs, k + 30)
    keep = k + max(bs, k // 2)
    if m + bs >= n:
        vals, vecs = _dense_smallest(A, B, k)
        return GeneralizedEigs(vals, vecs, _residuals(A, B, vals, vecs), True, "dense", 0)

    solve = _factorize(A - sigma * B)
    norm_a = float(abs(A).sum(axis=0).max())
    norm_b = float(abs(B).sum(axis=0).max())

    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n, bs))
    V = np.zeros((n, 0))
    BV = np.zeros((n, 0))
    OV = np.zeros((n, 0))  # operator images of the basis columns
    applied = 0
    while True:
        while V.shape[1] < m:
            W = _b_orthogonalize(W, V, BV)
            Q, BQ, evals = _b_orthonormal_block(W, B)
            if evals.min() < -1e-8 * max(abs(evals).max(), 1e-300):
                raise EigenSolverError("B-inner product is not positive; B is not positive definite")
            if Q.shape[1] == 0:
                # invariant subspace reached: continue from fresh directions
                W = rng.standard_normal((n, bs))
                continue
            V = np.hstack([V, Q])
            BV = np.hstack([BV, BQ])
            W = solve(BQ).reshape(n, -1)
            OV = np.hstack([OV, W])
            applied += Q.shape[1]

        AV = A @ V
        Ap = V.T @ AV
        Bp = V.T @ BV
        theta, Y = sla.eigh(0.5 * (Ap + Ap.T), 0.5 * (Bp + Bp.T))
        vals = theta[:k]
        vecs = V @ Y[:, :k]
        R = AV @ Y[:, :k] - BV @ (Y[:, :k] * vals)
        res = np.linalg.norm(R, axis=0) / np.linalg.norm(vecs, axis=0)
        floor = 1e3 * np.finfo(float).eps * (norm_a + np.abs(vals) * norm_b)
        if np.all(res <= np.maximum(tol, floor)):
            return GeneralizedEigs(vals, vecs, res, True, "lanczos", applied)
        if applied >= max_iter:
            log.warning("lanczos stopped after %d applications, max residual %.3e", applied, res.max())
            return GeneralizedEigs(vals, vecs, res, False, "lanczos", applied)
        # thick restart from Ritz vectors of the shift-inverted operator, which
        # keeps the retained space plus the next block a Krylov space
        H = BV.T @ OV
        _, Z = np.linalg.eigh(0.5 * (H + H.T))
        Z = Z[:, ::-1][:, :keep]
        W = _b_orthogonalize(W, V, BV)
        V, BV, OV = V @ Z, BV @ Z, OV @ Z


def solve_generalized(A, B, req: EigenRequest) -> GeneralizedEigs:
    """Smallest ``req.k`` eigenpairs of ``A x = lambda B x``, ascending.

    ``req.method="auto"`` uses LAPACK for dense inputs up to dimension 4096
    and sparse inputs up to 1000, and shift-invert Lanczos otherwise. On
    non-convergence the best iterate is returned with ``converged=False``.
    """
    n = A.shape[0]
    if req.k > n:
        raise ValueError(f"requested {req.k} eigenpairs of a dimension-{n} problem")
    method = req.method
    if method == "auto":
        limit = SPARSE_DENSE_LIMIT if sp.issparse(A) else DENSE_LIMIT
        method = "dense" if n <= limit else "lanczos"
    if method == "dense":
        vals, vecs = _dense_smallest(A, B, req.k)
        return GeneralizedEigs(vals, vecs, _residuals(A, B, vals, vecs), True, "dense", 0)
    sigma = None if req.shift == 0 else req.shift
    return lanczos(A, B, req.k, sigma=sigma, tol=req.tol, max_iter=req.max_iter)
