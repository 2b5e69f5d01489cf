"""Derivatives of simple eigenvalues and of volume-normalized eigenvalues.

For an eigenpair normalized by the weighted inner product, perturbing the
conformal factor gives ``d lambda = -lambda * integral(psi^2 delta_omega)``
against the base measure. Gradients with respect to ``omega`` are returned as
densities against that base measure: the directional derivative along
``delta_omega`` is ``sum(measure * density * delta_omega)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .lattice import FOUR_PI2, _as_params
from .spectral import apply_dxx, apply_dxy

log = logging.getLogger(__name__)

GAP_RTOL = 1e-6


@dataclass
class EigenGradient:
    """Gradient of ``lambda_k`` and of ``Lambda_k = lambda_k * volume``.

    ``d_a`` and ``d_b`` are ``None`` on surfaces without moduli.
    ``simple`` is False when the eigenvalue failed the gap test and the
    gradients are averages over its cluster.
    """

    lam: float
    volume: float
    d_omega: np.ndarray
    d_a: float | None = None
    d_b: float | None = None
    d_omega_normalized: np.ndarray | None = None
    d_a_normalized: float | None = None
    d_b_normalized: float | None = None
    simple: bool = True
    cluster: tuple[int, ...] = ()

    @property
    def normalized_value(self) -> float:
        return self.lam * self.volume


def gap_threshold(lam: float) -> float:
    return GAP_RTOL * max(abs(lam), 1.0)


def is_simple(values, k: int) -> bool:
    """Whether ``values[k]`` is separated from both neighbours by the gap threshold.

    The last available entry counts as unseparated above, since its upper
    neighbour is unknown.
    """
    values = np.asarray(values)
    thr = gap_threshold(values[k])
    below = k == 0 or values[k] - values[k - 1] > thr
    above = k + 1 < len(values) and values[k + 1] - values[k] > thr
    return bool(below and above)


def cluster_indices(values, k: int) -> tuple[list[int], bool]:
    """Indices of the eigenvalues chained to ``values[k]`` by sub-threshold gaps.

    The flag is True when the cluster reaches the last available entry and
    might continue beyond it.
    """
    values = np.asarray(values)
    thr = gap_threshold(values[k])
    lo = k
    while lo > 0 and values[lo] - values[lo - 1] <= thr:
        lo -= 1
    hi = k
    while hi + 1 < len(values) and values[hi + 1] - values[hi] <= thr:
        hi += 1
    return list(range(lo, hi + 1)), hi == len(values) - 1


# ---------------------------------------------------------------- grid (spectral collocation)

def grid_omega_density(lam: float, psi: np.ndarray) -> np.ndarray:
    """``d lambda / d omega`` on the grid as a density: ``-lambda psi^2``.

    ``psi`` is normalized by ``w * sum(omega psi^2) = 1`` with node weight ``w``.
    """
    return -lam * psi * psi


def grid_moduli_derivatives(p, n: int, lam: float, psi: np.ndarray, weight: float) -> tuple[float, float]:
    """``(d lambda / d a, d lambda / d b)`` for a grid eigenpair.

    With ``v = sqrt(weight) * psi`` satisfying ``v^T diag(omega) v = 1``:

    * ``d/da = -(4 pi^2 / b^2) v^T (2 a D_xx - 2 D_xy) v``
    * ``d/db = -2 lambda / b - (8 pi^2 / b) v^T D_xx v``
    """
    p = _as_params(p)
    a, b = p.a, p.b
    qxx = weight * float(psi @ apply_dxx(psi, n))
    qxy = weight * float(psi @ apply_dxy(psi, n))
    d_a = -(FOUR_PI2 / (b * b)) * (2 * a * qxx - 2 * qxy)
    d_b = -2.0 * lam / b - (2.0 * FOUR_PI2 / b) * qxx
    return d_a, d_b


# ---------------------------------------------------------------- meshes

def mesh_omega_density(lam: float, x: np.ndarray, mesh, measure: np.ndarray, area=None) -> np.ndarray:
    """``d lambda / d omega_m`` divided by the hat-function measure of vertex m."""
    from .fem import mass_derivative_quadratic

    return -lam * mass_derivative_quadratic(mesh, x, area) / measure


def mesh_moduli_derivatives(forms, p, lam: float, x: np.ndarray) -> tuple[float, float]:
    """Moduli derivatives on a flat-torus mesh in parameter form.

    The mass is ``b * M(omega)``, so with ``x^T B x = 1``
    ``d/da = x^T A_a x`` and ``d/db = x^T A_b x - lambda / b``.
    """
    p = _as_params(p)
    d_a = float(x @ (forms.stiffness_da(p) @ x))
    d_b = float(x @ (forms.stiffness_db(p) @ x)) - lam / p.b
    return d_a, d_b


# ---------------------------------------------------------------- product rule

def grad_normalized(lam: float, volume: float, d_omega: np.ndarray,
                    d_a: float | None = None, d_b: float | None = None, b: float | None = None):
    """Gradients of ``Lambda = lambda * volume`` from those of ``lambda``.

    The volume has density 1 in ``omega``, does not depend on ``a`` and
    scales like ``b``. Returns ``(d_omega, d_a, d_b)``.
    """
    if not volume > 0:
        raise ValueError("volume must be positive")
    g_omega = volume * np.asarray(d_omega) + lam
    g_a = None if d_a is None else volume * d_a
    g_b = None
    if d_b is not None:
        if b is None:
            raise ValueError("b is needed for the b-derivative of the volume")
        g_b = volume * d_b + lam * volume / b
    return g_omega, g_a, g_b


def eigen_gradient(surface, result, k: int, *, with_moduli: bool = False,
                   cluster_mode: str = "mean", warn: bool = True) -> EigenGradient:
    """Gradient of the k-th eigenvalue of ``result`` on ``surface``.

    ``surface`` provides ``omega_density(lam, vec)`` and, for moduli,
    ``moduli_derivatives(lam, vec)`` and ``params``. When ``lambda_k`` is not
    separated from its neighbours a warning is logged and ``cluster_mode``
    decides what is returned: ``"mean"`` averages over the cluster (the
    derivative of the cluster mean; ``result`` must hold the whole cluster),
    ``"own"`` keeps the formula for the computed k-th eigenvector, which is
    what a quasi-Newton method on the nonsmooth objective wants. Callers
    that report multiplicity themselves pass ``warn=False``.
    """
    if cluster_mode not in ("mean", "own"):
        raise ValueError(f"unknown cluster_mode {cluster_mode!r}")
    values = result.eigenvalues
    idx, open_top = cluster_indices(values, k)
    if open_top and len(values) > k + 1:
        log.debug("cluster of eigenvalue %d reaches the last computed index", k)
    simple = len(idx) == 1 and not open_top
    if not simple and warn:
        log.warning("eigenvalue %d is not simple (cluster %s); using the %s gradient", k, idx,
                    "cluster-mean" if cluster_mode == "mean" else "own-eigenvector")
    lam = float(values[k])
    used = idx if cluster_mode == "mean" else [k]
    d_omega = np.zeros(result.vectors.shape[0])
    d_a = d_b = 0.0 if with_moduli else None
    for j in used:
        vec = result.vectors[:, j]
        d_omega = d_omega + surface.omega_density(float(values[j]), vec)
        if with_moduli:
            da, db = surface.moduli_derivatives(float(values[j]), vec)
            d_a += da
            d_b += db
    m = len(used)
    d_omega /= m
    if with_moduli:
        d_a /= m
        d_b /= m
    b = surface.params.b if with_moduli else None
    gn = grad_normalized(lam, result.volume, d_omega, d_a, d_b, b)
    return EigenGradient(lam, result.volume, d_omega, d_a, d_b, gn[0], gn[1], gn[2], simple, tuple(idx))
